#pragma once

// Shared aliases and error plumbing for the vn library.

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kPi = std::numbers::pi;

// All validation failures surface as vn::Error with a message naming the
// offending object (layer index, dimension, config key).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

template <class... Ts>
std::string cat(Ts&&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

}  // namespace detail

template <class... Ts>
[[noreturn]] inline void fail(Ts&&... parts) {
  throw Error(detail::cat(std::forward<Ts>(parts)...));
}

template <class... Ts>
inline void require(bool cond, Ts&&... parts) {
  if (!cond) fail(std::forward<Ts>(parts)...);
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace vn
