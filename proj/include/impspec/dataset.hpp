#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace impspec {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Column-major numeric table with named columns.
struct Table {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // rows = observations

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index col_index(const std::string& name) const;
  Eigen::MatrixXd columns(const std::vector<std::string>& which) const;
  Eigen::VectorXd column(const std::string& name) const;
};

// Which columns play which part in the two-stage regression. w may be empty.
struct RoleMap {
  std::string y;
  std::vector<std::string> w;
  std::vector<std::string> v;
  std::vector<std::string> z;
};

// Primary table carries (Y, W, V); the optional second table carries (V, Z)
// for the data-fusion layout. Without a second table the primary carries all
// roles.
struct Dataset {
  Table d1;
  std::optional<Table> d2;
  RoleMap roles;

  bool fusion() const { return d2.has_value(); }
  const Table& stage2_table() const { return d2 ? *d2 : d1; }
};

enum class Estimand { Cate, Ate, Att };

struct CausalQuery {
  Estimand estimand = Estimand::Cate;
  RoleMap roles;
  bool fusion = false;

  bool w_empty() const { return roles.w.empty(); }
};

std::string estimand_name(Estimand e);
Estimand parse_estimand(const std::string& s);

// CSV with a header row, numeric payload, LF line endings.
void write_csv(const Table& t, const std::string& path);
Table read_csv(const std::string& path);

// Role map + fusion layout as a JSON sidecar. `second` names the second
// table's CSV relative to the sidecar when the layout is fusion.
void write_roles(const Dataset& d, const std::string& csv1,
                 const std::optional<std::string>& csv2, const std::string& path);

struct RolesFile {
  RoleMap roles;
  bool fusion = false;
  std::string second;  // second CSV name when fusion
};
RolesFile read_roles(const std::string& path);

// Convenience: write data.csv (+ data2.csv) and roles.json into a directory.
void write_dataset(const Dataset& d, const std::string& dir);
Dataset read_dataset(const std::string& data_csv, const std::string& roles_json,
                     const std::optional<std::string>& fusion_csv = std::nullopt);

}  // namespace impspec
