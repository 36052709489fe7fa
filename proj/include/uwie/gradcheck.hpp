#pragma once

#include <string>
#include <vector>

#include "uwie/tensor.hpp"

namespace uwie {

// Central finite-difference verification of every differentiable op and each
// composite block, run at both precisions. Relative error is
// |analytic - numeric| / max(1, |analytic|, |numeric|), maximised over a
// deterministic sample of coordinates.

struct GradCheckResult {
    std::string name;
    int instances = 0;
    double max_rel_f32 = 0.0;
    double max_rel_f64 = 0.0;
    bool pass = false;
};

inline constexpr double kGradTolF32 = 1e-3;
inline constexpr double kGradTolF64 = 1e-6;

// filter: substring of the case name; empty runs everything
std::vector<GradCheckResult> run_gradcheck(const std::string& filter = "", int instances = 5,
                                           std::uint64_t seed = 20240801);

bool gradcheck_passed(const std::vector<GradCheckResult>& results);
std::string format_gradcheck(const std::vector<GradCheckResult>& results);
std::vector<std::string> gradcheck_case_names();

}  // namespace uwie
