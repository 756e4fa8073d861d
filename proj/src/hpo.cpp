#include "foclab/hpo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "foclab/errors.hpp"
#include "foclab/rng.hpp"

namespace foclab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Decode a unit-box coordinate into the parameter's native value.
double decode(const ParamSpec& p, double u) {
    switch (p.kind) {
        case ParamSpec::Kind::Continuous: {
            if (p.log_scale) {
                const double ll = std::log(p.lo), lh = std::log(p.hi);
                return std::exp(ll + u * (lh - ll));
            }
            return p.lo + u * (p.hi - p.lo);
        }
        case ParamSpec::Kind::Integer: {
            const double v = p.lo + u * (p.hi - p.lo);
            return std::clamp(std::floor(v + 0.5), p.lo, p.hi);
        }
        case ParamSpec::Kind::Choice: {
            const auto idx = std::min<std::size_t>(
                static_cast<std::size_t>(u * p.choices.size()),
                p.choices.size() - 1);
            return p.choices[idx];
        }
    }
    return p.lo;
}

TrialParams decode_all(const HPOSpace& space, const VectorXd& u) {
    TrialParams out;
    for (std::size_t i = 0; i < space.params.size(); ++i) {
        out[space.params[i].name] = decode(space.params[i], u(i));
    }
    return out;
}

double sq_exp_kernel(const VectorXd& a, const VectorXd& b, double len) {
    return std::exp(-(a - b).squaredNorm() / (2.0 * len * len));
}

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

void HPOSpace::validate() const {
    if (params.empty()) throw ConfigError("hpo: empty parameter space");
    if (budget < 2) throw ConfigError("hpo: budget must be >= 2");
    for (const auto& p : params) {
        if (p.kind == ParamSpec::Kind::Choice) {
            if (p.choices.empty()) throw ConfigError("hpo: empty choice list");
        } else if (!(p.lo < p.hi)) {
            throw ConfigError("hpo: parameter range must satisfy lo < hi");
        } else if (p.log_scale && !(p.lo > 0.0)) {
            throw ConfigError("hpo: log-scale range must be positive");
        }
    }
}

HPOResult hpo_search(const HPOSpace& space, const Objective& objective) {
    space.validate();
    const int d = static_cast<int>(space.params.size());
    Rng rng(space.seed);

    std::vector<VectorXd> xs;
    HPOResult result;
    double best = std::numeric_limits<double>::infinity();

    const int n_init = space.mode == HPOSpace::Mode::Random
                           ? space.budget
                           : std::min(space.budget, std::max(4, d + 2));

    auto run_trial = [&](const VectorXd& u) {
        TrialResult tr;
        tr.index = static_cast<int>(result.trials.size());
        tr.params = decode_all(space, u);
        try {
            tr.value = objective(tr.params);
            if (!std::isfinite(tr.value)) tr.failed = true;
        } catch (const std::exception&) {
            tr.failed = true;
        }
        if (tr.failed) tr.value = std::numeric_limits<double>::infinity();
        if (!tr.failed && tr.value < best) {
            best = tr.value;
            result.best_index = tr.index;
        }
        xs.push_back(u);
        result.trials.push_back(tr);
    };

    for (int t = 0; t < n_init; ++t) {
        VectorXd u(d);
        for (int i = 0; i < d; ++i) u(i) = rng.uniform();
        run_trial(u);
    }

    while (static_cast<int>(result.trials.size()) < space.budget) {
        // collect finished, finite observations
        std::vector<int> ok;
        for (const auto& tr : result.trials) {
            if (!tr.failed) ok.push_back(tr.index);
        }
        VectorXd u_next(d);
        if (ok.size() < 2) {
            for (int i = 0; i < d; ++i) u_next(i) = rng.uniform();
            run_trial(u_next);
            continue;
        }

        // GP posterior over normalized objective values
        const auto n = static_cast<Eigen::Index>(ok.size());
        VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) y(i) = result.trials[ok[i]].value;
        const double mean = y.mean();
        double sd = std::sqrt((y.array() - mean).square().sum() /
                              std::max<double>(1, n - 1));
        if (!(sd > 1e-12)) sd = 1.0;
        const VectorXd yn = (y.array() - mean) / sd;

        const double len = 0.25 * std::sqrt(static_cast<double>(d));
        MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                k(i, j) = sq_exp_kernel(xs[ok[i]], xs[ok[j]], len);
            }
            k(i, i) += 1e-6;
        }
        const Eigen::LLT<MatrixXd> llt(k);
        const VectorXd alpha = llt.solve(yn);
        const double y_best = (best - mean) / sd;

        // acquisition: expected improvement over seeded candidates
        double best_ei = -1.0;
        for (int c = 0; c < 512; ++c) {
            VectorXd u(d);
            for (int i = 0; i < d; ++i) u(i) = rng.uniform();
            VectorXd kstar(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                kstar(i) = sq_exp_kernel(u, xs[ok[i]], len);
            }
            const double mu = kstar.dot(alpha);
            const VectorXd v = llt.matrixL().solve(kstar);
            const double var = std::max(1.0 + 1e-6 - v.squaredNorm(), 1e-12);
            const double sigma = std::sqrt(var);
            const double z = (y_best - mu) / sigma;
            const double ei = sigma * (z * normal_cdf(z) + normal_pdf(z));
            if (ei > best_ei) {
                best_ei = ei;
                u_next = u;
            }
        }
        run_trial(u_next);
    }

    if (result.best_index < 0) {
        throw Error("hpo: all " + std::to_string(result.trials.size()) +
                    " trials failed");
    }
    return result;
}

TinyFCSearchOutcome hpo_tinyfc(const std::vector<DatasetRecord>& dataset,
                               const TrainConfig& base, int budget,
                               std::uint64_t seed, std::size_t trial_subsample,
                               int trial_epochs) {
    HPOSpace space;
    space.budget = budget;
    space.seed = seed;
    space.params = {
        {"width_a", ParamSpec::Kind::Integer, 4, 12, false, {}},
        {"width_b", ParamSpec::Kind::Integer, 6, 16, false, {}},
        {"width_c", ParamSpec::Kind::Integer, 3, 8, false, {}},
        {"learning_rate", ParamSpec::Kind::Continuous, 1e-4, 1e-2, true, {}},
        {"batch_size", ParamSpec::Kind::Choice, 0, 0, false, {64, 128, 256, 512}},
    };

    // deterministic strided subsample for the trial objective
    std::vector<DatasetRecord> sub;
    if (dataset.size() > trial_subsample) {
        const std::size_t stride = dataset.size() / trial_subsample;
        for (std::size_t i = 0; i < dataset.size() && sub.size() < trial_subsample;
             i += stride) {
            sub.push_back(dataset[i]);
        }
    } else {
        sub = dataset;
    }

    auto configure = [&](const TrialParams& p) {
        TrainConfig cfg = base;
        cfg.learning_rate = p.at("learning_rate");
        cfg.batch_size = static_cast<int>(p.at("batch_size"));
        std::vector<int> widths = {static_cast<int>(p.at("width_a")),
                                   static_cast<int>(p.at("width_b")),
                                   static_cast<int>(p.at("width_b")),
                                   static_cast<int>(p.at("width_b")),
                                   static_cast<int>(p.at("width_c"))};
        return std::pair{cfg, widths};
    };

    const Objective objective = [&](const TrialParams& p) {
        auto [cfg, widths] = configure(p);
        cfg.epochs = trial_epochs;
        TinyFCModel m = build_tinyfc(widths, cfg.seed);
        return train(m, sub, cfg).best_val_mse;
    };

    TinyFCSearchOutcome out;
    out.search = hpo_search(space, objective);

    auto [cfg, widths] = configure(out.search.best().params);
    out.config = cfg;
    out.model = build_tinyfc(widths, cfg.seed);
    TrainHistory h = train(out.model, dataset, cfg);
    out.val_mse = h.best_val_mse;
    return out;
}

}  // namespace foclab
