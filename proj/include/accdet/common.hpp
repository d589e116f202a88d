#pragma once
// Shared aliases and the library-wide error type.
#include <Eigen/Dense>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace accdet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void msg_append(std::ostringstream&) {}
template <class T, class... Rest>
void msg_append(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    msg_append(os, rest...);
}
}  // namespace detail

template <class... Parts>
[[noreturn]] void fail(const Parts&... parts) {
    std::ostringstream os;
    detail::msg_append(os, parts...);
    throw Error(os.str());
}

template <class... Parts>
void require(bool cond, const Parts&... parts) {
    if (!cond) fail(parts...);
}

// FNV-1a, used for artifact hashes in reports and for seed derivation tags.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

}  // namespace accdet
