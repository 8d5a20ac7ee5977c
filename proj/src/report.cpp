#include "akb/report.hpp"

#include <sstream>

namespace akb {

void CheckReport::record_failure(Witness w, size_t max_witnesses) {
    status = Status::fail;
    if (witnesses.size() < max_witnesses) witnesses.push_back(std::move(w));
}

void CheckReport::merge(const CheckReport& other) {
    strings_checked += other.strings_checked;
    strings_edge += other.strings_edge;
    for (const auto& w : other.witnesses)
        if (witnesses.size() < 8) witnesses.push_back(w);
    if (other.status == Status::fail) status = Status::fail;
    else if (other.status == Status::edge_inconclusive && status == Status::pass)
        status = Status::edge_inconclusive;
    for (const auto& n : other.notes) notes.push_back(n);
}

std::string CheckReport::summary() const {
    std::ostringstream os;
    os << suite << ": ";
    switch (status) {
        case Status::pass: os << "pass"; break;
        case Status::fail: os << "FAIL"; break;
        case Status::edge_inconclusive: os << "edge-inconclusive"; break;
    }
    os << " (" << strings_checked << " strings";
    if (strings_edge) os << ", " << strings_edge << " edge";
    os << ")";
    if (!witnesses.empty()) {
        os << " witness: " << witnesses[0].basis_string << " at "
           << witnesses[0].deg.to_string();
        if (witnesses[0].hbar_order >= 0) os << " h-order " << witnesses[0].hbar_order;
    }
    return os.str();
}

int first_nonzero_order(const Element& e) {
    int best = -1;
    for (const auto& [k, c] : e.terms()) {
        for (int i = 0; i <= c.order(); ++i) {
            if (sgn(c.coeff(i)) != 0) {
                if (best < 0 || i < best) best = i;
                break;
            }
        }
    }
    return best;
}

}  // namespace akb
