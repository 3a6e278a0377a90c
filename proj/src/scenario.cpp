#include <fstream>
#include <istream>
#include <sstream>

#include "emes/experiments.hpp"

namespace emes {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("scenario: bad number for '" + key + "': " + value);
  }
  if (pos != value.size())
    throw ConfigError("scenario: bad number for '" + key + "': " + value);
  return v;
}

ScenarioSpec::PMaxRule parse_pmax(const std::string& value) {
  if (value == "P") return {true, 1.0};
  if (!value.empty() && value.back() == 'P')
    return {true, parse_number("p_max_values", value.substr(0, value.size() - 1))};
  return {false, parse_number("p_max_values", value)};
}

}  // namespace

ScenarioSpec parse_scenario(std::istream& is) {
  ScenarioSpec spec;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("scenario line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty())
      throw ConfigError("scenario: empty value for '" + key + "'");

    if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "replicates") {
      spec.replicates = static_cast<int>(parse_number(key, value));
    } else if (key == "n_values") {
      spec.n_values.clear();
      for (const auto& tok : split_list(value))
        spec.n_values.push_back(static_cast<int>(parse_number(key, tok)));
    } else if (key == "e_def_values") {
      spec.e_def_values.clear();
      for (const auto& tok : split_list(value))
        spec.e_def_values.push_back(parse_number(key, tok));
    } else if (key == "p_values") {
      spec.p_values.clear();
      for (const auto& tok : split_list(value))
        spec.p_values.push_back(parse_number(key, tok));
    } else if (key == "p_min") {
      spec.p_min = parse_number(key, value);
    } else if (key == "p_max_values") {
      spec.p_max_values.clear();
      for (const auto& tok : split_list(value))
        spec.p_max_values.push_back(parse_pmax(tok));
    } else if (key == "r") {
      spec.r = parse_number(key, value);
    } else if (key == "c_n") {
      spec.c_n = parse_number(key, value);
    } else if (key == "a_n") {
      spec.a_n = parse_number(key, value);
    } else if (key == "b_n") {
      spec.b_n = parse_number(key, value);
    } else if (key == "e_n_low") {
      spec.e_n_low = parse_number(key, value);
    } else if (key == "e_n_high") {
      spec.e_n_high = parse_number(key, value);
    } else if (key == "fit_tariff") {
      if (value == "P/N")
        spec.fit_tariff = {true, 0.0};
      else
        spec.fit_tariff = {false, parse_number(key, value)};
    } else if (key == "fit_dispatch") {
      if (value == "ascending")
        spec.fit_dispatch = FitDispatch::AscendingId;
      else if (value == "proportional")
        spec.fit_dispatch = FitDispatch::Proportional;
      else
        throw ConfigError("scenario: fit_dispatch must be 'ascending' or "
                          "'proportional'");
    } else {
      throw ConfigError("scenario: unknown key '" + key + "'");
    }
  }
  validate(spec);
  return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("scenario: cannot open file " + path);
  return parse_scenario(is);
}

}  // namespace emes
