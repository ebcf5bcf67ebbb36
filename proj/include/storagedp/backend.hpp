#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "storagedp/errors.hpp"
#include "storagedp/grid.hpp"
#include "storagedp/matrix.hpp"

namespace storagedp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Tolerance for a probability vector to count as a simplex.
inline constexpr double kSimplexTol = 1e-9;

using ActionIndex = std::uint16_t;

inline void require_simplex(std::span<const double> probs) {
    if (probs.empty()) throw ConfigError("probability vector is empty");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("probabilities must be finite and >= 0");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
        throw ConfigError("probabilities sum to " + std::to_string(sum) + ", expected 1");
}

/// The five kernels one backward-induction stage is made of:
/// gather_interpolate -> mask_assign -> outer_payoff -> broadcast_payoff_max -> expectation.
///
/// Kernels write into caller-owned outputs so a solve allocates its buffers once.
/// Every implementation must return the same values as ReferenceKernels.
class KernelSet {
public:
    virtual ~KernelSet() = default;

    virtual std::string_view name() const noexcept = 0;
    virtual unsigned threads() const noexcept = 0;

    /// out(i,j) = (1-w)*values[z_low] + w*values[z_high]
    virtual void gather_interpolate(std::span<const double> values, const TransitionTables& tables,
                                    Matrix<double>& out) const = 0;

    virtual void mask_assign(Matrix<double>& m, const Matrix<std::uint8_t>& mask,
                             double sentinel) const = 0;

    /// out(j,r) = actions[j] * prices[r]
    virtual void outer_payoff(std::span<const double> actions, std::span<const double> prices,
                              Matrix<double>& out) const = 0;

    /// out(i,r) = max_j payoff(j,r) + next(i,j). Ties go to the smallest j in
    /// argmax (when requested).
    virtual void broadcast_payoff_max(const Matrix<double>& next, const Matrix<double>& payoff,
                                      Matrix<double>& out, Matrix<ActionIndex>* argmax) const = 0;

    /// out = q * probs
    virtual void expectation(const Matrix<double>& q, std::span<const double> probs,
                             std::span<double> out) const = 0;
};

namespace detail {

inline void check_gather_shapes(std::span<const double> values, const TransitionTables& tables) {
    if (values.size() != tables.num_states())
        throw ConfigError("gather_interpolate: value vector length " + std::to_string(values.size()) +
                          " != " + std::to_string(tables.num_states()));
}

inline void check_max_shapes(const Matrix<double>& next, const Matrix<double>& payoff) {
    if (next.cols() != payoff.rows())
        throw ConfigError("broadcast_payoff_max: next has " + std::to_string(next.cols()) +
                          " actions but payoff has " + std::to_string(payoff.rows()));
}

[[noreturn]] inline void all_infeasible_row(std::size_t i) {
    throw InvariantError("broadcast_payoff_max: every action infeasible in state row " +
                         std::to_string(i));
}

// Row kernels shared by both backends. Keeping one definition per row makes
// the backends value-identical; they differ only in how rows are scheduled
// and in the loop order of the max.

inline void gather_row(std::size_t i, std::span<const double> values, const TransitionTables& t,
                       std::span<double> out) {
    const auto lo = t.z_low.row(i);
    const auto hi = t.z_high.row(i);
    const auto w = t.interp_weight.row(i);
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = (1.0 - w[j]) * values[lo[j]] + w[j] * values[hi[j]];
}

inline void mask_row(std::span<double> row, std::span<const std::uint8_t> mask, double sentinel) {
    for (std::size_t j = 0; j < row.size(); ++j)
        if (mask[j]) row[j] = sentinel;
}

inline double expectation_row(std::span<const double> q, std::span<const double> probs) {
    double acc = 0.0;
    for (std::size_t r = 0; r < q.size(); ++r) acc += q[r] * probs[r];
    return acc;
}

}  // namespace detail

/// Sequential kernels that follow the tensor formulation literally: each
/// state row materializes its P x R slice of the payoff-plus-continuation
/// tensor before reducing over actions.
class ReferenceKernels final : public KernelSet {
public:
    std::string_view name() const noexcept override { return "reference"; }
    unsigned threads() const noexcept override { return 1; }

    void gather_interpolate(std::span<const double> values, const TransitionTables& tables,
                            Matrix<double>& out) const override {
        detail::check_gather_shapes(values, tables);
        out.resize(tables.num_states(), tables.num_actions());
        for (std::size_t i = 0; i < out.rows(); ++i) detail::gather_row(i, values, tables, out.row(i));
    }

    void mask_assign(Matrix<double>& m, const Matrix<std::uint8_t>& mask, double sentinel) const override {
        require_same_shape(m, mask, "mask_assign");
        for (std::size_t i = 0; i < m.rows(); ++i) detail::mask_row(m.row(i), mask.row(i), sentinel);
    }

    void outer_payoff(std::span<const double> actions, std::span<const double> prices,
                      Matrix<double>& out) const override {
        out.resize(actions.size(), prices.size());
        for (std::size_t j = 0; j < actions.size(); ++j)
            for (std::size_t r = 0; r < prices.size(); ++r) out(j, r) = actions[j] * prices[r];
    }

    void broadcast_payoff_max(const Matrix<double>& next, const Matrix<double>& payoff,
                              Matrix<double>& out, Matrix<ActionIndex>* argmax) const override {
        detail::check_max_shapes(next, payoff);
        const std::size_t S = next.rows(), P = next.cols(), R = payoff.cols();
        out.resize(S, R);
        if (argmax) argmax->resize(S, R);
        std::vector<double> slice(P * R);
        for (std::size_t i = 0; i < S; ++i) {
            for (std::size_t j = 0; j < P; ++j)
                for (std::size_t r = 0; r < R; ++r) slice[j * R + r] = payoff(j, r) + next(i, j);
            for (std::size_t r = 0; r < R; ++r) {
                double best = kNegInf;
                std::size_t best_j = P;
                for (std::size_t j = 0; j < P; ++j) {
                    if (slice[j * R + r] > best) {
                        best = slice[j * R + r];
                        best_j = j;
                    }
                }
                if (best_j == P) detail::all_infeasible_row(i);
                out(i, r) = best;
                if (argmax) (*argmax)(i, r) = static_cast<ActionIndex>(best_j);
            }
        }
    }

    void expectation(const Matrix<double>& q, std::span<const double> probs,
                     std::span<double> out) const override {
        if (q.cols() != probs.size() || out.size() != q.rows())
            throw ConfigError("expectation: shape mismatch");
        require_simplex(probs);
        for (std::size_t i = 0; i < q.rows(); ++i) out[i] = detail::expectation_row(q.row(i), probs);
    }
};

/// Data-parallel kernels. State rows are distributed over a TBB arena and the
/// action max is fused: each row streams over actions with the sample
/// dimension innermost (contiguous, vectorizable) and never builds the
/// P x R slice.
class ParallelKernels final : public KernelSet {
public:
    explicit ParallelKernels(unsigned threads = 0)
        : threads_(effective_threads(threads)), arena_(static_cast<int>(threads_)) {}

    std::string_view name() const noexcept override { return "parallel"; }
    unsigned threads() const noexcept override { return threads_; }

    void gather_interpolate(std::span<const double> values, const TransitionTables& tables,
                            Matrix<double>& out) const override {
        detail::check_gather_shapes(values, tables);
        out.resize(tables.num_states(), tables.num_actions());
        for_rows(out.rows(), [&](std::size_t i) { detail::gather_row(i, values, tables, out.row(i)); });
    }

    void mask_assign(Matrix<double>& m, const Matrix<std::uint8_t>& mask, double sentinel) const override {
        require_same_shape(m, mask, "mask_assign");
        for_rows(m.rows(), [&](std::size_t i) { detail::mask_row(m.row(i), mask.row(i), sentinel); });
    }

    void outer_payoff(std::span<const double> actions, std::span<const double> prices,
                      Matrix<double>& out) const override {
        out.resize(actions.size(), prices.size());
        for_rows(actions.size(), [&](std::size_t j) {
            auto row = out.row(j);
            const double a = actions[j];
            for (std::size_t r = 0; r < row.size(); ++r) row[r] = a * prices[r];
        });
    }

    void broadcast_payoff_max(const Matrix<double>& next, const Matrix<double>& payoff,
                              Matrix<double>& out, Matrix<ActionIndex>* argmax) const override {
        detail::check_max_shapes(next, payoff);
        const std::size_t S = next.rows(), P = next.cols(), R = payoff.cols();
        out.resize(S, R);
        if (argmax) argmax->resize(S, R);
        for_rows(S, [&](std::size_t i) {
            double* __restrict best = out.row(i).data();
            std::fill(best, best + R, kNegInf);
            if (argmax) {
                ActionIndex* idx = argmax->row(i).data();
                for (std::size_t j = 0; j < P; ++j) {
                    const double v = next(i, j);
                    if (v == kNegInf) continue;
                    const double* pay = payoff.row(j).data();
                    for (std::size_t r = 0; r < R; ++r) {
                        const double c = pay[r] + v;
                        if (c > best[r]) {
                            best[r] = c;
                            idx[r] = static_cast<ActionIndex>(j);
                        }
                    }
                }
            } else {
                for (std::size_t j = 0; j < P; ++j) {
                    const double v = next(i, j);
                    if (v == kNegInf) continue;
                    const double* __restrict pay = payoff.row(j).data();
                    for (std::size_t r = 0; r < R; ++r) {
                        const double c = pay[r] + v;
                        best[r] = c > best[r] ? c : best[r];
                    }
                }
            }
            for (std::size_t r = 0; r < R; ++r)
                if (best[r] == kNegInf) detail::all_infeasible_row(i);
        });
    }

    void expectation(const Matrix<double>& q, std::span<const double> probs,
                     std::span<double> out) const override {
        if (q.cols() != probs.size() || out.size() != q.rows())
            throw ConfigError("expectation: shape mismatch");
        require_simplex(probs);
        for_rows(q.rows(), [&](std::size_t i) { out[i] = detail::expectation_row(q.row(i), probs); });
    }

    static unsigned effective_threads(unsigned requested) {
        const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
        return requested == 0 ? hw : std::min(requested, hw);
    }

private:
    template <class Body>
    void for_rows(std::size_t n, Body&& body) const {
        if (threads_ <= 1) {
            for (std::size_t i = 0; i < n; ++i) body(i);
            return;
        }
        arena_.execute([&] {
            tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 8),
                              [&](const tbb::blocked_range<std::size_t>& range) {
                                  for (std::size_t i = range.begin(); i != range.end(); ++i) body(i);
                              });
        });
    }

    unsigned threads_;
    mutable tbb::task_arena arena_;
};

/// "reference" or "parallel". threads == 0 means all hardware threads.
inline std::unique_ptr<KernelSet> make_backend(std::string_view name, unsigned threads = 0) {
    if (name == "reference") return std::make_unique<ReferenceKernels>();
    if (name == "parallel") return std::make_unique<ParallelKernels>(threads);
    throw ConfigError("unknown backend '" + std::string(name) + "' (expected reference|parallel)");
}

// Value-returning wrappers, convenient outside the hot loop.

inline Matrix<double> gather_interpolate(const KernelSet& k, std::span<const double> values,
                                         const TransitionTables& tables) {
    Matrix<double> out;
    k.gather_interpolate(values, tables, out);
    return out;
}

inline Matrix<double> outer_payoff(const KernelSet& k, std::span<const double> actions,
                                   std::span<const double> prices) {
    Matrix<double> out;
    k.outer_payoff(actions, prices, out);
    return out;
}

inline Matrix<double> broadcast_payoff_max(const KernelSet& k, const Matrix<double>& next,
                                           const Matrix<double>& payoff,
                                           Matrix<ActionIndex>* argmax = nullptr) {
    Matrix<double> out;
    k.broadcast_payoff_max(next, payoff, out, argmax);
    return out;
}

inline std::vector<double> expectation(const KernelSet& k, const Matrix<double>& q,
                                       std::span<const double> probs) {
    std::vector<double> out(q.rows());
    k.expectation(q, probs, out);
    return out;
}

}  // namespace storagedp
