// Shared test utilities: scratch directories, random matrices and a central
// finite-difference comparator.
#pragma once

#include "motionstyle/common.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace testutil {

using motionstyle::Mat64;
using motionstyle::Rng;

// unique scratch directory below the build tree, removed on destruction
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("motionstyle_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline Mat64 random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Mat64 m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal() * scale;
    return m;
}

inline double rel_err(double analytic, double numeric) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

// Central finite differences of a scalar functional against an analytic
// gradient, on a deterministic sample of entries. `eval` must recompute the
// loss from the (mutated) parameter matrix.
struct FdReport {
    double max_rel_err = 0;
    int checked = 0;
};

inline FdReport finite_diff_check(Mat64& param, const Mat64& analytic_grad,
                                  const std::function<double()>& eval, int samples,
                                  std::uint64_t seed, double h_scale = 1e-5) {
    FdReport report;
    Rng rng(seed);
    const Eigen::Index n = param.size();
    for (int s = 0; s < samples && s < n; ++s) {
        Eigen::Index idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        double* slot = param.data() + idx;
        const double saved = *slot;
        const double h = h_scale * (1.0 + std::abs(saved));
        *slot = saved + h;
        const double up = eval();
        *slot = saved - h;
        const double down = eval();
        *slot = saved;
        const double numeric = (up - down) / (2.0 * h);
        // both matrices share shape and (column-major) layout; index linearly
        const double a = *(analytic_grad.data() + idx);
        if (std::abs(a) < 1e-10 && std::abs(numeric) < 1e-10) {
            report.checked++;
            continue;
        }
        report.max_rel_err = std::max(report.max_rel_err, rel_err(a, numeric));
        report.checked++;
    }
    return report;
}

}  // namespace testutil
