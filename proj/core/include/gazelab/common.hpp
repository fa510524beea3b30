#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace gazelab {

// Error taxonomy shared by every module.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes do not match the operation's requirements.
struct shape_error : error {
    using error::error;
};

// A precondition on arguments or object state was violated.
struct contract_error : error {
    using error::error;
};

// Non-finite values appeared where finite arithmetic was required.
struct numeric_error : error {
    using error::error;
};

// An on-disk artifact has a bad magic, version, or is truncated.
struct format_error : error {
    using error::error;
};

// Training produced a NaN loss.
struct divergence_error : error {
    using error::error;
};

// FNV-1a, used for file checksums and config hashes.
inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
}

}  // namespace gazelab
