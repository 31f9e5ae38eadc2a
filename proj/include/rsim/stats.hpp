#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rsim/csv.hpp"
#include "rsim/distributions.hpp"
#include "rsim/levels.hpp"

namespace rsim::stats {

/// One metric reading for one subject in one cell of the 3x3 within-subjects
/// design. Replicates (same subject, same cell) are allowed and are averaged
/// before the decomposition.
struct FactorialSample {
    int subject_id = 0;
    WarningLevel warning = WarningLevel::None;
    Aggressiveness aggressiveness = Aggressiveness::Low;
    double value = 0.0;
};

/// One row of the ANOVA table. F is tested against the matching
/// effect-by-subject error term (within-subjects design), so each row carries
/// its own error df and mean square.
struct EffectResult {
    int df = 0;
    double sum_sq = 0.0;
    double mean_square = 0.0;
    int error_df = 0;
    double error_sum_sq = 0.0;
    double error_mean_square = 0.0;
    double F = 0.0;
    double p = 1.0;
    double partial_eta_sq = 0.0;
    /// True when the error mean square vanished while the effect did not;
    /// F is reported as +infinity and p as 0 in that case.
    bool degenerate = false;
};

struct AnovaResult {
    EffectResult warning;
    EffectResult aggressiveness;
    EffectResult interaction;
    int n_subjects = 0;
    double grand_mean = 0.0;
    double ss_subjects = 0.0;
    double ss_total = 0.0;
};

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

/// Upper tail of the F distribution: P(F_{df1,df2} > F).
/// Computed through the regularized incomplete beta, so the absolute error is
/// far below the 1e-10 the table computations need.
inline double f_upper_tail(double F, int df1, double df2) {
    if (!(F >= 0.0)) throw DataError("f_upper_tail: F must be >= 0");
    if (df1 < 1) throw DataError("f_upper_tail: df1 must be >= 1");
    if (!(df2 > 0.0)) throw DataError("f_upper_tail: df2 must be > 0");
    if (std::isinf(F)) return 0.0;
    const double x = df2 / (df2 + df1 * F);
    return regularized_incomplete_beta(x, 0.5 * df2, 0.5 * df1);
}

/// Two-sided p for a Student-t statistic.
inline double t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw DataError("t_two_sided_p: df must be > 0");
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return regularized_incomplete_beta(x, 0.5 * df, 0.5);
}

/// Welch's unequal-variance t-test.
///
/// t = (mean_a - mean_b) / sqrt(s_a^2/n_a + s_b^2/n_b), with the
/// Welch-Satterthwaite degrees of freedom and a two-sided p. The sign follows
/// the argument order: mean_a < mean_b gives t < 0.
inline WelchResult welch_t(const std::vector<double>& sample_a, const std::vector<double>& sample_b) {
    auto moments = [](const std::vector<double>& xs, const char* which) {
        if (xs.size() < 2)
            throw DataError(std::string("welch_t: sample ") + which + " needs at least 2 values, got " +
                            std::to_string(xs.size()));
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        const double var = ss / static_cast<double>(xs.size() - 1);
        if (!(var > 0.0)) throw DataError(std::string("welch_t: sample ") + which + " has zero variance");
        return std::pair<double, double>(mean, var);
    };
    const auto [ma, va] = moments(sample_a, "a");
    const auto [mb, vb] = moments(sample_b, "b");
    const double na = static_cast<double>(sample_a.size());
    const double nb = static_cast<double>(sample_b.size());
    const double qa = va / na;
    const double qb = vb / nb;
    WelchResult r;
    r.t = (ma - mb) / std::sqrt(qa + qb);
    r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    r.p = t_two_sided_p(r.t, r.df);
    return r;
}

namespace detail {

/// Cell means of a balanced subject x warning x aggressiveness layout.
/// Throws DataError naming the first offending subject/cell when unbalanced.
struct CellTable {
    std::vector<int> subjects;                 // sorted distinct ids
    std::vector<std::array<double, 9>> cells;  // [subject][warning*3 + aggressiveness]
};

inline CellTable cell_means(const std::vector<FactorialSample>& samples) {
    std::map<int, std::array<double, 9>> sums;
    std::map<int, std::array<int, 9>> counts;
    for (const auto& s : samples) {
        const std::size_t cell =
            static_cast<std::size_t>(s.warning) * 3 + static_cast<std::size_t>(s.aggressiveness);
        auto [it, fresh] = sums.try_emplace(s.subject_id);
        if (fresh) {
            it->second.fill(0.0);
            counts[s.subject_id].fill(0);
        }
        it->second[cell] += s.value;
        counts[s.subject_id][cell] += 1;
    }
    if (sums.size() < 2)
        throw DataError("rm_anova: need at least 2 subjects, got " + std::to_string(sums.size()));
    CellTable t;
    for (auto& [subject, cell_sums] : sums) {
        const auto& cell_counts = counts[subject];
        std::array<double, 9> means{};
        for (std::size_t c = 0; c < 9; ++c) {
            if (cell_counts[c] == 0)
                throw DataError("rm_anova: unbalanced design: subject " + std::to_string(subject) +
                                " has no value for warning=" +
                                warning_level_name(static_cast<WarningLevel>(c / 3)) + " aggressiveness=" +
                                aggressiveness_name(static_cast<Aggressiveness>(c % 3)));
            means[c] = cell_sums[c] / cell_counts[c];
        }
        t.subjects.push_back(subject);
        t.cells.push_back(means);
    }
    return t;
}

inline void finish_effect(EffectResult& e, double ss_eff, int df_eff, double ss_err, int df_err, double zero_tol) {
    e.df = df_eff;
    e.sum_sq = ss_eff;
    e.mean_square = ss_eff / df_eff;
    e.error_df = df_err;
    e.error_sum_sq = ss_err;
    e.error_mean_square = ss_err / df_err;
    if (ss_eff <= zero_tol) {
        // No effect variance at all: report the null outcome even when the
        // error term is also zero (constant data).
        e.F = 0.0;
        e.p = 1.0;
        e.partial_eta_sq = 0.0;
        return;
    }
    if (e.error_mean_square <= zero_tol) {
        e.degenerate = true;
        e.F = std::numeric_limits<double>::infinity();
        e.p = 0.0;
        e.partial_eta_sq = 1.0;
        return;
    }
    e.F = e.mean_square / e.error_mean_square;
    e.p = f_upper_tail(e.F, df_eff, static_cast<double>(df_err));
    e.partial_eta_sq = ss_eff / (ss_eff + ss_err);
}

}  // namespace detail

/// Two-way repeated-measures ANOVA on a balanced subject x 3 x 3 design.
///
/// Each effect (warning, aggressiveness, interaction) is tested against its
/// own effect-by-subject error term: F = MS_effect / MS_(effect x subject).
/// Partial eta squared = SS_effect / (SS_effect + SS_error). Replicated cells
/// are mean-aggregated per subject before decomposition.
inline AnovaResult rm_anova(const std::vector<FactorialSample>& samples) {
    const detail::CellTable table = detail::cell_means(samples);
    const std::size_t n = table.subjects.size();
    const double dn = static_cast<double>(n);

    // Marginal means. Factor W (warning) and factor A (aggressiveness) both
    // have 3 levels; cells are indexed w*3 + a.
    double grand = 0.0;
    std::vector<double> m_subj(n, 0.0);
    std::array<double, 3> m_w{}, m_a{};
    std::array<double, 9> m_wa{};
    std::vector<std::array<double, 3>> m_sw(n, {0.0, 0.0, 0.0});
    std::vector<std::array<double, 3>> m_sa(n, {0.0, 0.0, 0.0});
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t w = 0; w < 3; ++w) {
            for (std::size_t a = 0; a < 3; ++a) {
                const double y = table.cells[s][w * 3 + a];
                grand += y;
                m_subj[s] += y;
                m_w[w] += y;
                m_a[a] += y;
                m_wa[w * 3 + a] += y;
                m_sw[s][w] += y;
                m_sa[s][a] += y;
            }
        }
    }
    grand /= 9.0 * dn;
    for (auto& v : m_subj) v /= 9.0;
    for (auto& v : m_w) v /= 3.0 * dn;
    for (auto& v : m_a) v /= 3.0 * dn;
    for (auto& v : m_wa) v /= dn;
    for (auto& row : m_sw)
        for (auto& v : row) v /= 3.0;
    for (auto& row : m_sa)
        for (auto& v : row) v /= 3.0;

    // Sums of squares of the full within-subjects decomposition.
    double ss_subj = 0.0, ss_w = 0.0, ss_a = 0.0, ss_wa = 0.0;
    double ss_ws = 0.0, ss_as = 0.0, ss_was = 0.0, ss_total = 0.0;
    for (std::size_t s = 0; s < n; ++s) ss_subj += (m_subj[s] - grand) * (m_subj[s] - grand);
    ss_subj *= 9.0;
    for (std::size_t w = 0; w < 3; ++w) ss_w += (m_w[w] - grand) * (m_w[w] - grand);
    ss_w *= 3.0 * dn;
    for (std::size_t a = 0; a < 3; ++a) ss_a += (m_a[a] - grand) * (m_a[a] - grand);
    ss_a *= 3.0 * dn;
    for (std::size_t w = 0; w < 3; ++w)
        for (std::size_t a = 0; a < 3; ++a) {
            const double d = m_wa[w * 3 + a] - m_w[w] - m_a[a] + grand;
            ss_wa += d * d;
        }
    ss_wa *= dn;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t w = 0; w < 3; ++w) {
            const double d = m_sw[s][w] - m_subj[s] - m_w[w] + grand;
            ss_ws += d * d;
        }
    ss_ws *= 3.0;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < 3; ++a) {
            const double d = m_sa[s][a] - m_subj[s] - m_a[a] + grand;
            ss_as += d * d;
        }
    ss_as *= 3.0;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t w = 0; w < 3; ++w)
            for (std::size_t a = 0; a < 3; ++a) {
                const double y = table.cells[s][w * 3 + a];
                const double fitted = m_sw[s][w] + m_sa[s][a] + m_wa[w * 3 + a] - m_subj[s] - m_w[w] - m_a[a] + grand;
                ss_was += (y - fitted) * (y - fitted);
                ss_total += (y - grand) * (y - grand);
            }

    // Scale-aware zero threshold so constant (or effect-free) data lands on
    // the exact F = 0 / p = 1 branch instead of 0/0 noise.
    double scale = 0.0;
    for (std::size_t s = 0; s < n; ++s)
        for (double y : table.cells[s]) scale += y * y;
    const double zero_tol = scale * 1e-26;

    const int in = static_cast<int>(n);
    AnovaResult r;
    r.n_subjects = in;
    r.grand_mean = grand;
    r.ss_subjects = ss_subj;
    r.ss_total = ss_total;
    detail::finish_effect(r.warning, ss_w, 2, ss_ws, 2 * (in - 1), zero_tol);
    detail::finish_effect(r.aggressiveness, ss_a, 2, ss_as, 2 * (in - 1), zero_tol);
    detail::finish_effect(r.interaction, ss_wa, 4, ss_was, 4 * (in - 1), zero_tol);
    return r;
}

/// Single-df within-subjects contrast over one factor's levels.
///
/// `weights` (summing to zero) pool the three levels of the chosen factor;
/// e.g. {1, -0.5, -0.5} over warning compares "no warning" with the pooled
/// warned conditions. Per subject the contrast score L_s is the weighted sum
/// of that subject's level means (averaged over the other factor), and the
/// test is the exact one-sample t on {L_s}: F = t^2 with df (1, n-1).
struct ContrastResult {
    double estimate = 0.0;  // mean contrast score across subjects
    double t = 0.0;
    double F = 0.0;
    int df1 = 1;
    int df2 = 0;
    double p = 1.0;
};

enum class Factor { Warning, Aggressiveness };

inline ContrastResult rm_contrast(const std::vector<FactorialSample>& samples, Factor factor,
                                  const std::array<double, 3>& weights) {
    double wsum = weights[0] + weights[1] + weights[2];
    if (std::fabs(wsum) > 1e-12) throw DataError("rm_contrast: weights must sum to zero");
    if (weights[0] == 0.0 && weights[1] == 0.0 && weights[2] == 0.0)
        throw DataError("rm_contrast: weights must not all be zero");
    const detail::CellTable table = detail::cell_means(samples);
    const std::size_t n = table.subjects.size();
    std::vector<double> score(n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t level = 0; level < 3; ++level) {
            double level_mean = 0.0;
            for (std::size_t other = 0; other < 3; ++other) {
                const std::size_t cell = factor == Factor::Warning ? level * 3 + other : other * 3 + level;
                level_mean += table.cells[s][cell];
            }
            score[s] += weights[level] * (level_mean / 3.0);
        }
    }
    double mean = 0.0;
    for (double v : score) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : score) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n - 1);
    ContrastResult r;
    r.estimate = mean;
    r.df2 = static_cast<int>(n) - 1;
    if (!(var > 0.0)) {
        if (mean == 0.0) return r;  // t = 0, p = 1
        r.t = std::numeric_limits<double>::infinity() * (mean > 0 ? 1.0 : -1.0);
        r.F = std::numeric_limits<double>::infinity();
        r.p = 0.0;
        return r;
    }
    r.t = mean / std::sqrt(var / static_cast<double>(n));
    r.F = r.t * r.t;
    r.p = f_upper_tail(r.F, 1, static_cast<double>(r.df2));
    return r;
}

/// Long-format reader: columns `subject,warning,aggressiveness,value`.
inline std::vector<FactorialSample> read_factorial_csv(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    csv::require_columns(t, {"subject", "warning", "aggressiveness", "value"}, "factorial CSV");
    std::vector<FactorialSample> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t lineno = t.line_numbers[i];
        if (row.size() != 4)
            throw ParseError("line " + std::to_string(lineno) + ": expected 4 fields, got " +
                             std::to_string(row.size()));
        FactorialSample s;
        s.subject_id = static_cast<int>(csv::parse_long(row[0], lineno, "subject"));
        try {
            s.warning = parse_warning_level(row[1]);
            s.aggressiveness = parse_aggressiveness(row[2]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        s.value = csv::parse_double(row[3], lineno, "value");
        out.push_back(s);
    }
    if (out.empty()) throw EmptyInputError("'" + path + "' has no data rows");
    return out;
}

/// ANOVA table as CSV, one row per effect.
inline std::string anova_table_csv(const AnovaResult& r) {
    std::ostringstream out;
    out << "effect,df,error_df,sum_sq,mean_square,F,p,partial_eta_sq\n";
    auto row = [&out](const char* name, const EffectResult& e) {
        out << name << ',' << e.df << ',' << e.error_df << ',' << format_double(e.sum_sq) << ','
            << format_double(e.mean_square) << ',' << format_double(e.F) << ',' << format_double(e.p) << ','
            << format_double(e.partial_eta_sq) << '\n';
    };
    row("warning", r.warning);
    row("aggressiveness", r.aggressiveness);
    row("warning_x_aggressiveness", r.interaction);
    return out.str();
}

}  // namespace rsim::stats
