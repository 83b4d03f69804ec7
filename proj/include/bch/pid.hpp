#ifndef BCH_PID_HPP
#define BCH_PID_HPP

#include <algorithm>
#include <cmath>
#include <optional>

#include "bch/error.hpp"
#include "bch/knn_info.hpp"
#include "bch/timeseries.hpp"

namespace bch {

/// Operands of a two-source decomposition, all under one condition set C.
struct PIDInputs {
    double i_total = 0.0;   // I(T; S1, S2 | C)
    double i_1 = 0.0;       // I(T; S1 | C)
    double i_2 = 0.0;       // I(T; S2 | C)
    double i_sources = 0.0; // I(S1; S2 | C)
    double h_1 = 1.0;       // H(S1 | C)
    double h_2 = 1.0;       // H(S2 | C)
};

struct PIDComponents {
    double redundant = 0.0;
    double synergistic = 0.0;
    double unique_m = 0.0;
    double unique_n = 0.0;

    double sum() const { return redundant + synergistic + unique_m + unique_n; }

    PIDComponents& operator+=(const PIDComponents& o)
    {
        redundant += o.redundant;
        synergistic += o.synergistic;
        unique_m += o.unique_m;
        unique_n += o.unique_n;
        return *this;
    }
};

/**
 * Result of pid_decompose.
 *
 * The public components are non-negative. `raw` keeps the values before the
 * final clamp; raw components always sum to `total`. Any clamp shows up in
 * the flags and in `clamp_residual` = sum(components) - total.
 */
struct PIDResult : PIDComponents {
    double total = 0.0;
    PIDComponents raw;
    double r_min = 0.0;
    double r_mmi = 0.0;
    double source_dependency = 0.0; // I_s in [0, 1]
    bool normalization_fallback = false;
    bool inputs_clamped = false;
    bool components_clamped = false;
    double clamp_residual = 0.0;
};

/// Entropy floor for the source-dependency normalization, in nats.
inline constexpr double pid_entropy_floor = 1e-6;

/**
 * Rescaled-redundancy decomposition:
 *   R = R_min + I_s (R_MMI - R_min),
 *   R_min = max(0, -II), II = I - I_1 - I_2, R_MMI = min(I_1, I_2),
 *   I_s = I(S1;S2|C) / min(H(S1|C), H(S2|C)) clamped to [0, 1].
 * I_1 and I_2 are first clamped into [0, max(0, I)], and a negative I counts
 * as zero in II.
 */
inline PIDResult pid_decompose(const PIDInputs& in)
{
    for (double v : {in.i_total, in.i_1, in.i_2, in.i_sources, in.h_1, in.h_2}) {
        if (!std::isfinite(v)) {
            throw PreconditionError("pid", "pid_decompose", "non-finite input");
        }
    }
    PIDResult out;
    out.total = in.i_total;

    const double upper = std::max(0.0, in.i_total);
    const double i1 = std::clamp(in.i_1, 0.0, upper);
    const double i2 = std::clamp(in.i_2, 0.0, upper);
    out.inputs_clamped = i1 != in.i_1 || i2 != in.i_2;

    const double interaction = upper - i1 - i2;
    out.r_min = std::max(0.0, -interaction);
    out.r_mmi = std::max(0.0, std::min(i1, i2));

    double norm = std::min(in.h_1, in.h_2);
    if (norm <= pid_entropy_floor) {
        norm = pid_entropy_floor;
        if (in.i_sources > 0.0) {
            out.normalization_fallback = true;
        }
    }
    out.source_dependency =
        out.normalization_fallback ? 1.0 : std::clamp(in.i_sources / norm, 0.0, 1.0);

    const double r = out.r_min + out.source_dependency * (out.r_mmi - out.r_min);
    out.raw.redundant = r;
    out.raw.unique_m = i1 - r;
    out.raw.unique_n = i2 - r;
    out.raw.synergistic = in.i_total - i1 - i2 + r;

    auto clamp0 = [&](double v) {
        if (v < 0.0) {
            out.components_clamped = true;
            return 0.0;
        }
        return v;
    };
    out.redundant = clamp0(out.raw.redundant);
    out.unique_m = clamp0(out.raw.unique_m);
    out.unique_n = clamp0(out.raw.unique_n);
    out.synergistic = clamp0(out.raw.synergistic);
    out.clamp_residual = out.sum() - out.total;
    return out;
}

/// Decomposition of a value carried entirely by one source.
inline PIDResult pid_single_source(double i_total, bool source_is_m)
{
    PIDInputs in;
    in.i_total = i_total;
    (source_is_m ? in.i_1 : in.i_2) = i_total;
    return pid_decompose(in);
}

/// All-zero decomposition for an empty source set.
inline PIDResult pid_zero()
{
    return pid_decompose(PIDInputs{});
}

/// Conditional entropy H(S | C) = H(S, C) - H(C) by Kozachenko-Leonenko.
inline double conditional_entropy(const SampleMatrix& s, const SampleMatrix& c, const EstimatorConfig& cfg)
{
    if (!c.has_columns()) {
        return kl_entropy(s, cfg).value;
    }
    const SampleMatrix sc = hconcat({&s, &c});
    return kl_entropy(sc, cfg).value - kl_entropy(c, cfg).value;
}

/**
 * Runs the five estimator calls on pre-aligned matrices (one shared row set)
 * and decomposes. `known_total`, when given, is used for I(T; S1,S2 | C)
 * instead of re-estimating it, so callers can reuse an identical estimate.
 */
inline PIDResult pid_from_matrices(const SampleMatrix& target, const SampleMatrix& s1, const SampleMatrix& s2,
                                   const SampleMatrix& cond, const EstimatorConfig& cfg,
                                   std::optional<double> known_total = std::nullopt)
{
    if (!s1.has_columns() && !s2.has_columns()) {
        throw ContractViolation("pid", "pid_from_samples", "both source sets are empty");
    }
    auto total = [&](const SampleMatrix& sources) {
        return known_total ? *known_total : fp_cmi(target, sources, cond, cfg).value;
    };
    if (!s1.has_columns()) {
        return pid_single_source(total(s2), false);
    }
    if (!s2.has_columns()) {
        return pid_single_source(total(s1), true);
    }
    PIDInputs in;
    in.i_total = total(hconcat({&s1, &s2}));
    in.i_1 = fp_cmi(target, s1, cond, cfg).value;
    in.i_2 = fp_cmi(target, s2, cond, cfg).value;
    in.i_sources = fp_cmi(s1, s2, cond, cfg).value;
    in.h_1 = conditional_entropy(s1, cond, cfg);
    in.h_2 = conditional_entropy(s2, cond, cfg);
    return pid_decompose(in);
}

/// Extracts every role with one complete-case row mask, then decomposes.
inline PIDResult pid_from_samples(const LaggedNode& target, const NodeSet& s1_nodes, const NodeSet& s2_nodes,
                                  const NodeSet& condition_nodes, const TimeSeriesSet& ts,
                                  const EstimatorConfig& cfg)
{
    if (s1_nodes.empty() && s2_nodes.empty()) {
        throw ContractViolation("pid", "pid_from_samples", "both source sets are empty");
    }
    for (const auto& n : s1_nodes) {
        if (s2_nodes.contains(n)) {
            throw ContractViolation("pid", "pid_from_samples",
                                    "node " + to_string(n) + " appears in both source sets");
        }
    }
    NodeSet all = s1_nodes;
    all.insert(s2_nodes.begin(), s2_nodes.end());
    all.insert(condition_nodes.begin(), condition_nodes.end());
    all.insert(target);
    const LaggedSamples samples = extract_lagged_matrix(ts, all);
    return pid_from_matrices(samples.columns(NodeSet{target}), samples.columns(s1_nodes),
                             samples.columns(s2_nodes), samples.columns(condition_nodes), cfg);
}

} // namespace bch

#endif
