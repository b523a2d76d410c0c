#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdlab/csv.hpp"
#include "sdlab/distill.hpp"

namespace sdlab {

inline constexpr int kTrajectorySchemaVersion = 1;

// JSON-lines layout (documented in docs/formats.md): the first line is a
// header object carrying the run configuration and terminal summary, followed
// by one object per optimization step.

namespace detail {

inline nlohmann::json vec2_to_json(const Vec2& v) { return nlohmann::json::array({v.x, v.y}); }

inline Vec2 vec2_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw std::runtime_error("expected a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline std::string trajectory_file_stem(DistillMethod method, const Vec2& start,
                                        std::uint64_t seed) {
  std::ostringstream s;
  s << to_string(method) << "_start_" << format_double(start.x) << '_' << format_double(start.y)
    << "_seed" << std::setw(4) << std::setfill('0') << seed;
  return s.str();
}

inline void write_trajectory_jsonl(const std::filesystem::path& path,
                                   const TrajectoryRecord& rec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  nlohmann::json header = {
      {"record", "header"},
      {"schema_version", kTrajectorySchemaVersion},
      {"method", to_string(rec.config.method)},
      {"optimizer", to_string(rec.config.optimizer)},
      {"start", detail::vec2_to_json(rec.start)},
      {"seed", rec.config.seed},
      {"steps", rec.config.steps},
      {"learning_rate", rec.config.lr},
      {"guidance_scale", rec.config.guidance_scale},
      {"t_min", rec.config.t_min},
      {"t_max", rec.config.t_max},
      {"weighting", to_string(rec.config.weighting)},
      {"jsd_ratio_weight", rec.config.jsd_ratio_weight},
      {"guided_inversion", rec.config.guided_inversion},
      {"inversion_steps", rec.config.inversion_steps},
      {"target_class", rec.config.target_class},
      {"terminal_theta", detail::vec2_to_json(rec.terminal_theta)},
      {"terminal_mode", rec.terminal_mode},
      {"terminal_distance", rec.terminal_distance},
  };
  out << header.dump() << '\n';
  for (const StepRecord& s : rec.steps) {
    nlohmann::json line = {
        {"record", "step"},
        {"step", s.step},
        {"theta_before", detail::vec2_to_json(s.theta_before)},
        {"theta_after", detail::vec2_to_json(s.theta_after)},
        {"t", s.t},
        {"eps_main", detail::vec2_to_json(s.eps_main)},
        {"control_variate", detail::vec2_to_json(s.control_variate)},
        {"gradient", detail::vec2_to_json(s.gradient)},
    };
    out << line.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline TrajectoryRecord read_trajectory_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("trajectory " + path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("trajectory " + path.string() + ": empty file");
  const std::string where = "trajectory " + path.string();
  try {
    const nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("record", "") != "header")
      throw std::runtime_error(where + ": first line is not a header record");
    if (header.value("schema_version", -1) != kTrajectorySchemaVersion)
      throw std::runtime_error(where + ": unsupported schema_version");
    TrajectoryRecord rec;
    rec.config.method = parse_distill_method(header.at("method").get<std::string>());
    rec.config.optimizer = parse_particle_optimizer(header.at("optimizer").get<std::string>());
    rec.start = detail::vec2_from_json(header.at("start"));
    rec.config.seed = header.at("seed").get<std::uint64_t>();
    rec.config.steps = header.at("steps").get<int>();
    rec.config.lr = header.at("learning_rate").get<double>();
    rec.config.guidance_scale = header.at("guidance_scale").get<double>();
    rec.config.t_min = header.at("t_min").get<int>();
    rec.config.t_max = header.at("t_max").get<int>();
    rec.config.weighting = parse_weight_mode(header.at("weighting").get<std::string>());
    rec.config.jsd_ratio_weight = header.at("jsd_ratio_weight").get<bool>();
    rec.config.guided_inversion = header.at("guided_inversion").get<bool>();
    rec.config.inversion_steps = header.at("inversion_steps").get<int>();
    rec.config.target_class = header.at("target_class").get<int>();
    rec.terminal_theta = detail::vec2_from_json(header.at("terminal_theta"));
    rec.terminal_mode = header.at("terminal_mode").get<int>();
    rec.terminal_distance = header.at("terminal_distance").get<double>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const nlohmann::json sj = nlohmann::json::parse(line);
      if (sj.value("record", "") != "step")
        throw std::runtime_error(where + ": unexpected record type after header");
      StepRecord s;
      s.step = sj.at("step").get<int>();
      s.theta_before = detail::vec2_from_json(sj.at("theta_before"));
      s.theta_after = detail::vec2_from_json(sj.at("theta_after"));
      s.t = sj.at("t").get<int>();
      s.eps_main = detail::vec2_from_json(sj.at("eps_main"));
      s.control_variate = detail::vec2_from_json(sj.at("control_variate"));
      s.gradient = detail::vec2_from_json(sj.at("gradient"));
      rec.steps.push_back(s);
    }
    if (static_cast<int>(rec.steps.size()) != rec.config.steps)
      throw std::runtime_error(where + ": step count does not match the header");
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(where + ": malformed record (" + std::string(e.what()) + ")");
  }
}

inline void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& rec) {
  CsvWriter csv(path.string());
  csv.row({"step", "t", "theta_before_x", "theta_before_y", "theta_after_x", "theta_after_y",
           "eps_main_x", "eps_main_y", "control_variate_x", "control_variate_y", "gradient_x",
           "gradient_y"});
  for (const StepRecord& s : rec.steps) {
    csv.row({format_int(s.step), format_int(s.t), format_double(s.theta_before.x),
             format_double(s.theta_before.y), format_double(s.theta_after.x),
             format_double(s.theta_after.y), format_double(s.eps_main.x),
             format_double(s.eps_main.y), format_double(s.control_variate.x),
             format_double(s.control_variate.y), format_double(s.gradient.x),
             format_double(s.gradient.y)});
  }
  csv.close();
}

}  // namespace sdlab
