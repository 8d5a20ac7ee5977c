#pragma once

#include <map>
#include <string>
#include <vector>

#include "akb/bigraded.hpp"

namespace akb {

struct Witness {
    std::string basis_string;
    Bidegree deg{};
    int hbar_order = -1;  // first h-order where lhs != rhs; -1 when not applicable
    std::string lhs, rhs;
};

// Structured result of one verification suite.
struct CheckReport {
    enum class Status { pass, fail, edge_inconclusive };

    std::string suite;
    Status status = Status::pass;
    std::vector<Witness> witnesses;
    long strings_checked = 0;
    long strings_edge = 0;
    std::map<std::string, std::string> params;
    std::vector<std::string> notes;

    bool passed() const { return status == Status::pass; }
    void record_failure(Witness w, size_t max_witnesses = 8);
    void merge(const CheckReport& other);  // combines counters and worst status
    std::string summary() const;
};

// first h-order at which a nonzero element differs from zero
int first_nonzero_order(const Element& e);

}  // namespace akb
