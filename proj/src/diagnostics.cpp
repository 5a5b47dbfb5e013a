#include <cmath>
#include <limits>

#include "shelfrec/reward.hpp"

namespace shelfrec::reward {

namespace {

std::vector<std::vector<double>> split_chains(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> out;
    for (const auto& c : chains) {
        const std::size_t h = c.size() / 2;
        out.emplace_back(c.begin(), c.begin() + h);
        out.emplace_back(c.end() - h, c.end());
    }
    return out;
}

struct Moments {
    std::vector<double> means;
    double W = 0.0;
    double B = 0.0;
    double var_plus = 0.0;
    std::size_t n = 0;
};

Moments moments(const std::vector<std::vector<double>>& chains) {
    Moments mo;
    const std::size_t m = chains.size();
    mo.n = chains.front().size();
    const double n = static_cast<double>(mo.n);
    double grand = 0.0;
    for (const auto& c : chains) {
        double s = 0.0;
        for (double v : c) s += v;
        mo.means.push_back(s / n);
        grand += s / n;
    }
    grand /= static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
        double ss = 0.0;
        for (double v : chains[j]) ss += (v - mo.means[j]) * (v - mo.means[j]);
        mo.W += ss / (n - 1.0);
        mo.B += (mo.means[j] - grand) * (mo.means[j] - grand);
    }
    mo.W /= static_cast<double>(m);
    mo.B = m > 1 ? n * mo.B / static_cast<double>(m - 1) : 0.0;
    mo.var_plus = (n - 1.0) / n * mo.W + mo.B / n;
    return mo;
}

bool usable(const std::vector<std::vector<double>>& chains) {
    if (chains.empty()) return false;
    const std::size_t n = chains.front().size();
    for (const auto& c : chains) {
        if (c.size() != n) throw ArgumentError("diagnostics: chains differ in length");
    }
    return n >= 4;
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
    if (!usable(chains)) return std::numeric_limits<double>::quiet_NaN();
    const auto mo = moments(split_chains(chains));
    if (mo.W <= 0.0) return mo.B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    return std::sqrt(mo.var_plus / mo.W);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
    if (!usable(chains)) return std::numeric_limits<double>::quiet_NaN();
    const auto split = split_chains(chains);
    const auto mo = moments(split);
    const std::size_t m = split.size();
    const std::size_t n = mo.n;
    const double total = static_cast<double>(m * n);
    if (mo.var_plus <= 0.0) return total;
    if (mo.W <= 0.0) return 1.0;

    auto rho = [&](std::size_t lag) {
        double acov = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const auto& c = split[j];
            double s = 0.0;
            for (std::size_t t = 0; t + lag < n; ++t) s += (c[t] - mo.means[j]) * (c[t + lag] - mo.means[j]);
            acov += s / static_cast<double>(n);
        }
        acov /= static_cast<double>(m);
        // the biased within-chain variance matches lag 0 of acov
        const double w_biased = mo.W * (static_cast<double>(n) - 1.0) / static_cast<double>(n);
        return 1.0 - (w_biased - acov) / mo.var_plus;
    };

    double tau_sum = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = rho(2 * k) + rho(2 * k + 1);
        if (pair < 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau_sum += pair;
    }
    const double tau = std::max(-1.0 + 2.0 * tau_sum, 1.0 / std::log10(total));
    return total / tau;
}

DiagnosticsReport mcmc_diagnostics(const RbpPosterior& post, double rhat_threshold, double ess_threshold) {
    DiagnosticsReport rep;
    rep.rhat_threshold = rhat_threshold;
    rep.ess_threshold = ess_threshold;
    rep.rhat_available = post.n_chains() >= 2;
    const std::size_t P = post.n_params();
    rep.params.resize(P);
    const long long PP = static_cast<long long>(P);
#pragma omp parallel for schedule(dynamic, 16)
    for (long long p = 0; p < PP; ++p) {
        std::vector<std::vector<double>> chains(post.n_chains());
        for (std::size_t c = 0; c < post.n_chains(); ++c) {
            chains[c].resize(post.n_draws);
            for (int d = 0; d < post.n_draws; ++d) chains[c][d] = post.value(c, d, p);
        }
        auto& pd = rep.params[p];
        pd.name = post.param_name(p);
        pd.rhat = rep.rhat_available ? split_rhat(chains) : std::numeric_limits<double>::quiet_NaN();
        pd.ess = effective_sample_size(chains);
    }
    rep.max_rhat = P ? -std::numeric_limits<double>::infinity() : 1.0;
    rep.min_ess = P ? std::numeric_limits<double>::infinity() : 0.0;
    for (const auto& pd : rep.params) {
        if (std::isnan(pd.rhat) || std::isnan(pd.ess)) {
            rep.pass = false;
            continue;
        }
        rep.max_rhat = std::max(rep.max_rhat, pd.rhat);
        rep.min_ess = std::min(rep.min_ess, pd.ess);
    }
    if (!rep.rhat_available) rep.pass = false;
    if (rep.max_rhat > rhat_threshold || rep.min_ess < ess_threshold) rep.pass = false;
    return rep;
}

}  // namespace shelfrec::reward
