#pragma once

#include <stdexcept>
#include <string>

namespace akb {

// Violated precondition on structural data (order mismatch, space mismatch,
// arity mismatch).  Distinct from assertion failures, which indicate bugs.
class structural_error : public std::runtime_error {
public:
    explicit structural_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace akb
