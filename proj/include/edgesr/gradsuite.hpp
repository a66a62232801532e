#pragma once

#include <string>
#include <vector>

#include "edgesr/gradcheck.hpp"

namespace edgesr {
namespace gradsuite {

struct Entry {
    std::string name;
    GradCheckReport report;
};

// Module names accepted by run(); empty string means all.
std::vector<std::string> modules();

// Finite-difference gradient checks over the primitive ops and every
// composite block (NEA, hybrid residual block, tiny generator, tiny
// discriminator, loss stack), repeated across `seeds` random draws.
std::vector<Entry> run(const std::string& module = "", int seeds = 3);

}  // namespace gradsuite
}  // namespace edgesr
