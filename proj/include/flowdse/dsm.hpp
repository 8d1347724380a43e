#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace flowdse {

enum class Direction { input, output };

struct PortRef {
  std::string module;
  std::string port;
  Direction direction = Direction::output;

  [[nodiscard]] std::string label() const { return module + "." + port; }

  friend bool operator==(const PortRef&, const PortRef&) = default;
  friend auto operator<=>(const PortRef&, const PortRef&) = default;
};

struct PortBounds {
  int min_connections = 0;
  int max_connections = 0;

  friend bool operator==(const PortBounds&, const PortBounds&) = default;
};

// One allowed (output, input) cell of the matrix, as port indices.
struct Connection {
  std::size_t output = 0;
  std::size_t input = 0;

  friend bool operator==(const Connection&, const Connection&) = default;
  friend auto operator<=>(const Connection&, const Connection&) = default;
};

/// Design Space Matrix: which output ports may be wired to which input ports,
/// how many connections each port must have, and which modules obey the
/// all-or-none rule (either every port of the module is connected or none).
///
/// Immutable after construction; the constructor validates every invariant
/// and throws InputError naming the offending port.
class DesignSpaceMatrix {
 public:
  DesignSpaceMatrix() = default;
  DesignSpaceMatrix(std::vector<PortRef> outputs, std::vector<PortRef> inputs,
                    std::vector<Connection> allowed,
                    std::vector<PortBounds> output_bounds,
                    std::vector<PortBounds> input_bounds,
                    std::set<std::string> all_or_none_modules);

  [[nodiscard]] const std::vector<PortRef>& outputs() const { return outputs_; }
  [[nodiscard]] const std::vector<PortRef>& inputs() const { return inputs_; }
  // Allowed cells in row-major (output, input) order.
  [[nodiscard]] const std::vector<Connection>& allowed() const { return allowed_; }
  [[nodiscard]] bool is_allowed(std::size_t output, std::size_t input) const;
  [[nodiscard]] const PortBounds& output_bounds(std::size_t o) const { return output_bounds_[o]; }
  [[nodiscard]] const PortBounds& input_bounds(std::size_t i) const { return input_bounds_[i]; }
  [[nodiscard]] const std::set<std::string>& all_or_none_modules() const {
    return all_or_none_;
  }
  // Non-fatal findings, e.g. a max bound larger than the port's allowed cells.
  [[nodiscard]] const std::vector<std::string>& warnings() const { return warnings_; }

  [[nodiscard]] std::optional<std::size_t> find_output(std::string_view label) const;
  [[nodiscard]] std::optional<std::size_t> find_input(std::string_view label) const;
  // Index of the allowed cell, if the pair is allowed.
  [[nodiscard]] std::optional<std::size_t> allowed_index(Connection c) const;

  friend bool operator==(const DesignSpaceMatrix&, const DesignSpaceMatrix&) = default;

 private:
  std::vector<PortRef> outputs_;
  std::vector<PortRef> inputs_;
  std::vector<Connection> allowed_;
  std::vector<PortBounds> output_bounds_;
  std::vector<PortBounds> input_bounds_;
  std::set<std::string> all_or_none_;
  std::vector<std::string> warnings_;
};

struct Design {
  std::uint64_t id = 0;
  std::vector<Connection> connections;  // sorted row-major
  std::set<std::string> active_modules;

  friend bool operator==(const Design&, const Design&) = default;
};

// Per-allowed-cell restriction used for partial enumeration: nullopt leaves
// the cell free, otherwise the cell is pinned to the given value.
using CellConstraints = std::vector<std::optional<bool>>;

DesignSpaceMatrix parse_dsm(const nlohmann::json& document);
DesignSpaceMatrix parse_dsm_csv(std::istream& in);
// Dispatches on extension: ".csv" is read as the matrix rendering, anything
// else as JSON.
DesignSpaceMatrix load_dsm(const std::filesystem::path& path);

nlohmann::json to_json(const DesignSpaceMatrix& dsm);
void write_dsm_csv(const DesignSpaceMatrix& dsm, std::ostream& out);

/// Visits every valid design in lexicographic order of the row-major
/// connection bitvector (cleared bits first). The visitor returns false to
/// stop early. Returns the number of designs visited.
std::uint64_t for_each_design(const DesignSpaceMatrix& dsm,
                              const std::function<bool(const Design&)>& visit,
                              const CellConstraints& constraints = {});

std::vector<Design> enumerate_designs(const DesignSpaceMatrix& dsm);
std::uint64_t count_designs(const DesignSpaceMatrix& dsm,
                            const CellConstraints& constraints = {});

// k designs drawn uniformly without replacement (reservoir sampling over the
// enumeration stream), returned in ascending id order.
std::vector<Design> sample_designs(const DesignSpaceMatrix& dsm, std::size_t k,
                                   std::uint64_t seed);

// Pins every allowed cell to its value in `design` except the cells that
// touch a port of one of `modules` or share a port with such a cell.
CellConstraints freeze_except(const DesignSpaceMatrix& dsm, const Design& design,
                              const std::set<std::string>& modules);

// Checks a connection set against the matrix and builds the Design value.
// Throws InputError on disallowed cells or violated bounds.
Design make_design(const DesignSpaceMatrix& dsm,
                   const std::vector<std::pair<std::string, std::string>>& connections,
                   std::uint64_t id = 0);
// True when the connection set satisfies allowed cells, bounds and the
// all-or-none rule.
bool is_valid_design(const DesignSpaceMatrix& dsm, const std::vector<Connection>& connections);

std::optional<std::uint64_t> find_design_id(const DesignSpaceMatrix& dsm,
                                            const std::vector<Connection>& connections);

std::vector<std::pair<std::string, std::string>> connection_labels(const DesignSpaceMatrix& dsm,
                                                                   const Design& design);

}  // namespace flowdse
