#include "impspec/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace impspec {

namespace fs = std::filesystem;
using nlohmann::json;

Eigen::Index Table::col_index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Eigen::Index>(i);
  throw IoError("column not found: " + name);
}

Eigen::MatrixXd Table::columns(const std::vector<std::string>& which) const {
  Eigen::MatrixXd out(values.rows(), static_cast<Eigen::Index>(which.size()));
  for (std::size_t i = 0; i < which.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = values.col(col_index(which[i]));
  return out;
}

Eigen::VectorXd Table::column(const std::string& name) const {
  return values.col(col_index(name));
}

std::string estimand_name(Estimand e) {
  switch (e) {
    case Estimand::Cate: return "cate";
    case Estimand::Ate: return "ate";
    case Estimand::Att: return "att";
  }
  return "cate";
}

Estimand parse_estimand(const std::string& s) {
  if (s == "cate") return Estimand::Cate;
  if (s == "ate") return Estimand::Ate;
  if (s == "att") return Estimand::Att;
  throw IoError("unknown estimand: " + s);
}

void write_csv(const Table& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  for (std::size_t i = 0; i < t.names.size(); ++i) {
    if (i) out << ',';
    out << t.names[i];
  }
  out << '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.values.cols(); ++c) {
      if (c) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", t.values(r, c));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Table read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Table t;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.names.push_back(cell);
  }
  std::vector<double> data;
  Eigen::Index rows = 0;
  const std::size_t cols = t.names.size();
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        data.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("non-numeric cell in " + path + ": " + cell);
      }
      ++c;
    }
    if (c != cols) throw IoError("ragged row in " + path);
    ++rows;
  }
  t.values.resize(rows, static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(cols); ++c)
      t.values(r, c) = data[static_cast<std::size_t>(r) * cols + c];
  return t;
}

void write_roles(const Dataset& d, const std::string& csv1,
                 const std::optional<std::string>& csv2, const std::string& path) {
  json j;
  j["y"] = d.roles.y;
  j["w"] = d.roles.w;
  j["v"] = d.roles.v;
  j["z"] = d.roles.z;
  j["fusion"] = d.fusion();
  j["data"] = csv1;
  if (csv2) j["second"] = *csv2;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << j.dump(2) << '\n';
}

RolesFile read_roles(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("bad roles json " + path + ": " + e.what());
  }
  RolesFile r;
  r.roles.y = j.at("y").get<std::string>();
  r.roles.w = j.at("w").get<std::vector<std::string>>();
  r.roles.v = j.at("v").get<std::vector<std::string>>();
  r.roles.z = j.at("z").get<std::vector<std::string>>();
  r.fusion = j.value("fusion", false);
  r.second = j.value("second", std::string());
  return r;
}

void write_dataset(const Dataset& d, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path base(dir);
  write_csv(d.d1, (base / "data.csv").string());
  std::optional<std::string> second;
  if (d.fusion()) {
    write_csv(*d.d2, (base / "data2.csv").string());
    second = "data2.csv";
  }
  write_roles(d, "data.csv", second, (base / "roles.json").string());
}

Dataset read_dataset(const std::string& data_csv, const std::string& roles_json,
                     const std::optional<std::string>& fusion_csv) {
  RolesFile rf = read_roles(roles_json);
  Dataset d;
  d.roles = rf.roles;
  d.d1 = read_csv(data_csv);
  if (fusion_csv) {
    d.d2 = read_csv(*fusion_csv);
  } else if (rf.fusion && !rf.second.empty()) {
    const fs::path sidecar(roles_json);
    d.d2 = read_csv((sidecar.parent_path() / rf.second).string());
  }
  return d;
}

}  // namespace impspec
