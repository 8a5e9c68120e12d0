#ifndef WATTBOUND_DIAGNOSTICS_HPP
#define WATTBOUND_DIAGNOSTICS_HPP

#include <sstream>
#include <stdexcept>
#include <string>

namespace wattbound {

// Error categories map onto the CLI exit-code contract: annotation errors
// exit 3, everything else analysis-related exits 2.
enum class ErrKind {
  Parse,
  Model,
  Annotation,
  Analysis,
  Simulation,
};

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrKind kind() const { return kind_; }

 private:
  ErrKind kind_;
};

namespace detail {
inline void cat_one(std::ostringstream&) {}
template <typename T, typename... Rest>
void cat_one(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  cat_one(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  detail::cat_one(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] void fail(ErrKind kind, const Args&... args) {
  throw Error(kind, cat(args...));
}

}  // namespace wattbound

#endif
