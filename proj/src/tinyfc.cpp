#include "foclab/tinyfc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "foclab/errors.hpp"
#include "foclab/rng.hpp"

namespace foclab {

namespace {

int activation_width(const std::vector<Layer>& branch, int act_index) {
    return act_index == 0 ? branch.front().spec.in_width
                          : branch[act_index - 1].spec.out_width;
}

double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::Identity: return z;
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
    }
    return z;
}

double activation_grad(Activation a, double z, double out) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - out * out;
    }
    return 1.0;
}

// Scratch buffers reused across samples; act[b][k] is activation k of branch
// b for the current sample.
struct Workspace {
    std::vector<std::vector<std::vector<double>>> act;  // [branch][act idx]
    std::vector<std::vector<std::vector<double>>> pre;  // [branch][layer]
    std::vector<double> cat;
    double merge_pre = 0.0;
    double out = 0.0;

    // gradient buffers
    std::vector<std::vector<std::vector<double>>> dact;
    std::vector<double> dcat;

    // shape cache so per-sample calls skip reallocation
    const TinyFCModel* cached_model = nullptr;
    std::size_t cached_params = 0;

    void ensure(const TinyFCModel& m) {
        const std::size_t params = m.param_count();
        if (cached_model == &m && cached_params == params) return;
        resize(m);
        cached_model = &m;
        cached_params = params;
    }

    void resize(const TinyFCModel& m) {
        const std::size_t nb = m.branches.size();
        act.assign(nb, {});
        pre.assign(nb, {});
        dact.assign(nb, {});
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& branch = m.branches[b];
            act[b].resize(branch.size() + 1);
            dact[b].resize(branch.size() + 1);
            pre[b].resize(branch.size());
            act[b][0].resize(branch.front().spec.in_width);
            dact[b][0].resize(branch.front().spec.in_width);
            for (std::size_t l = 0; l < branch.size(); ++l) {
                act[b][l + 1].resize(branch[l].spec.out_width);
                dact[b][l + 1].resize(branch[l].spec.out_width);
                pre[b][l].resize(branch[l].spec.out_width);
            }
        }
        cat.resize(m.merge.spec.in_width);
        dcat.resize(m.merge.spec.in_width);
    }
};

// xn: normalized input vector (width 3). Returns the tanh merge output.
double forward_normalized(const TinyFCModel& m, const double* xn, Workspace& ws) {
    std::size_t cat_off = 0;
    for (std::size_t b = 0; b < m.branches.size(); ++b) {
        const auto& branch = m.branches[b];
        std::copy(xn, xn + branch.front().spec.in_width, ws.act[b][0].begin());
        for (std::size_t l = 0; l < branch.size(); ++l) {
            const Layer& layer = branch[l];
            const auto& in = ws.act[b][l];
            auto& z = ws.pre[b][l];
            auto& out = ws.act[b][l + 1];
            const int ni = layer.spec.in_width;
            const int no = layer.spec.out_width;
            for (int i = 0; i < no; ++i) {
                const double* wr = layer.w.data() + static_cast<std::size_t>(i) * ni;
                double acc = layer.b[i];
                for (int j = 0; j < ni; ++j) acc += wr[j] * in[j];
                z[i] = acc;
            }
            if (layer.spec.residual_from) {
                const auto& src = ws.act[b][*layer.spec.residual_from];
                for (int i = 0; i < no; ++i) z[i] += src[i];
            }
            for (int i = 0; i < no; ++i) {
                out[i] = apply_activation(layer.spec.activation, z[i]);
            }
        }
        const auto& branch_out = ws.act[b].back();
        std::copy(branch_out.begin(), branch_out.end(), ws.cat.begin() + cat_off);
        cat_off += branch_out.size();
    }
    double acc = m.merge.b[0];
    for (int j = 0; j < m.merge.spec.in_width; ++j) acc += m.merge.w[j] * ws.cat[j];
    ws.merge_pre = acc;
    ws.out = apply_activation(m.merge.spec.activation, acc);
    return ws.out;
}

struct Gradients {
    std::vector<std::vector<Layer>> branches;  // weights reused as grad storage
    Layer merge;

    void init_like(const TinyFCModel& m) {
        branches = m.branches;
        merge = m.merge;
        zero();
    }
    void zero() {
        for (auto& br : branches)
            for (auto& l : br) {
                std::fill(l.w.begin(), l.w.end(), 0.0);
                std::fill(l.b.begin(), l.b.end(), 0.0);
            }
        std::fill(merge.w.begin(), merge.w.end(), 0.0);
        std::fill(merge.b.begin(), merge.b.end(), 0.0);
    }
};

// Backprop for one sample; dloss_dy is d(loss)/d(model output). The forward
// pass for this sample must already be in ws.
void backward_normalized(const TinyFCModel& m, Workspace& ws, double dloss_dy,
                         Gradients& g) {
    const double dzm =
        dloss_dy * activation_grad(m.merge.spec.activation, ws.merge_pre, ws.out);
    for (int j = 0; j < m.merge.spec.in_width; ++j) {
        g.merge.w[j] += dzm * ws.cat[j];
        ws.dcat[j] = dzm * m.merge.w[j];
    }
    g.merge.b[0] += dzm;

    std::size_t cat_off = 0;
    for (std::size_t b = 0; b < m.branches.size(); ++b) {
        const auto& branch = m.branches[b];
        for (auto& v : ws.dact[b]) std::fill(v.begin(), v.end(), 0.0);
        auto& dout = ws.dact[b].back();
        for (std::size_t i = 0; i < dout.size(); ++i) {
            dout[i] = ws.dcat[cat_off + i];
        }
        cat_off += dout.size();

        for (std::size_t l = branch.size(); l-- > 0;) {
            const Layer& layer = branch[l];
            Layer& grad = g.branches[b][l];
            const int ni = layer.spec.in_width;
            const int no = layer.spec.out_width;
            const auto& in = ws.act[b][l];
            auto& din = ws.dact[b][l];
            for (int i = 0; i < no; ++i) {
                const double dz =
                    ws.dact[b][l + 1][i] *
                    activation_grad(layer.spec.activation, ws.pre[b][l][i],
                                    ws.act[b][l + 1][i]);
                if (dz == 0.0) continue;
                double* gw = grad.w.data() + static_cast<std::size_t>(i) * ni;
                const double* wr = layer.w.data() + static_cast<std::size_t>(i) * ni;
                for (int j = 0; j < ni; ++j) {
                    gw[j] += dz * in[j];
                    din[j] += dz * wr[j];
                }
                grad.b[i] += dz;
                if (layer.spec.residual_from) {
                    ws.dact[b][*layer.spec.residual_from][i] += dz;
                }
            }
        }
    }
}

void normalize_input(const InputNorm& n, const double* raw, double* out) {
    for (int i = 0; i < kTinyFCInputs; ++i) {
        out[i] = (raw[i] - n.mean[i]) / n.std[i];
    }
}

}  // namespace

std::size_t TinyFCModel::param_count() const {
    std::size_t n = merge.param_count();
    for (const auto& br : branches)
        for (const auto& l : br) n += l.param_count();
    return n;
}

void TinyFCModel::validate() const {
    if (branches.size() != 2) throw ConfigError("tinyfc: expected two branches");
    int cat_width = 0;
    for (const auto& branch : branches) {
        if (branch.empty()) throw ConfigError("tinyfc: empty branch");
        if (branch.front().spec.in_width != kTinyFCInputs) {
            throw ConfigError("tinyfc: branch input width must be 3");
        }
        for (std::size_t l = 0; l < branch.size(); ++l) {
            const LayerSpec& s = branch[l].spec;
            if (s.in_width < 1 || s.out_width < 1) {
                throw ConfigError("tinyfc: layer widths must be >= 1");
            }
            if (l > 0 && s.in_width != branch[l - 1].spec.out_width) {
                throw ConfigError("tinyfc: layer width chain mismatch");
            }
            if (branch[l].w.size() !=
                    static_cast<std::size_t>(s.in_width) * s.out_width ||
                branch[l].b.size() != static_cast<std::size_t>(s.out_width)) {
                throw ConfigError("tinyfc: weight storage does not match spec");
            }
            if (s.residual_from) {
                const int src = *s.residual_from;
                if (src < 0 || src > static_cast<int>(l)) {
                    throw ConfigError("tinyfc: residual source must be an earlier activation");
                }
                if (activation_width(branch, src) != s.out_width) {
                    throw ConfigError("tinyfc: residual source width must equal out_width");
                }
            }
        }
        cat_width += branch.back().spec.out_width;
    }
    if (merge.spec.in_width != cat_width || merge.spec.out_width != 1) {
        throw ConfigError("tinyfc: merge must map concatenated branch outputs to 1");
    }
    if (merge.spec.activation != Activation::Tanh) {
        throw ConfigError("tinyfc: merge activation must be tanh");
    }
    if (merge.w.size() != static_cast<std::size_t>(merge.spec.in_width) ||
        merge.b.size() != 1) {
        throw ConfigError("tinyfc: merge storage does not match spec");
    }
    if (!(target_scale > 0.0)) throw ConfigError("tinyfc: target_scale must be > 0");
}

TinyFCModel build_tinyfc(const std::vector<int>& hidden_widths,
                         std::uint64_t seed) {
    if (hidden_widths.size() != 5) {
        throw ConfigError("build_tinyfc: expected 5 per-branch layer widths");
    }
    Rng rng(seed);
    TinyFCModel m;
    auto make_layer = [&rng](int ni, int no, Activation act,
                             std::optional<int> res) {
        Layer l;
        l.spec = {ni, no, act, res};
        l.w.resize(static_cast<std::size_t>(ni) * no);
        l.b.assign(no, 0.0);
        const double s = std::sqrt(6.0 / (ni + no));
        for (auto& w : l.w) w = rng.uniform(-s, s);
        return l;
    };
    for (int b = 0; b < 2; ++b) {
        std::vector<Layer> branch;
        int prev = kTinyFCInputs;
        for (std::size_t l = 0; l < hidden_widths.size(); ++l) {
            // skips on layers 3 and 4 (activations 2 and 3 as sources)
            std::optional<int> res;
            if (l == 2) res = 2;
            if (l == 3) res = 3;
            branch.push_back(make_layer(prev, hidden_widths[l], Activation::Relu, res));
            prev = hidden_widths[l];
        }
        m.branches.push_back(std::move(branch));
    }
    m.merge = make_layer(2 * hidden_widths.back(), 1, Activation::Tanh, std::nullopt);
    m.validate();
    return m;
}

double forward_unit(const TinyFCModel& model, double omega_ref,
                    double omega_meas, double iq_pi) {
    if (!model.input_norm.fitted) {
        throw StateError("tinyfc forward: input normalization not fitted");
    }
    if (!std::isfinite(omega_ref) || !std::isfinite(omega_meas) ||
        !std::isfinite(iq_pi)) {
        throw DomainError("tinyfc forward: non-finite input");
    }
    const double raw[3] = {omega_ref, omega_meas, iq_pi};
    double xn[3];
    normalize_input(model.input_norm, raw, xn);
    thread_local Workspace ws;
    ws.ensure(model);
    return forward_normalized(model, xn, ws);
}

double forward(const TinyFCModel& model, double omega_ref, double omega_meas,
               double iq_pi) {
    return model.target_scale * forward_unit(model, omega_ref, omega_meas, iq_pi);
}

void attach_augmentor(LoopConfig& cfg, const TinyFCModel& model) {
    cfg.augmentor = [model](double omega_ref, double omega_meas, double iq_pi) {
        return forward_unit(model, omega_ref, omega_meas, iq_pi);
    };
    cfg.augment_scale = model.target_scale;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    const double sum = split[0] + split[1] + split[2];
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("train: split must sum to 1");
}

DatasetSplit split_dataset(const std::vector<DatasetRecord>& dataset,
                           const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
    if (dataset.size() < 10) {
        throw DomainError("split_dataset: need at least 10 records");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9 ||
        ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
        throw DomainError("split_dataset: invalid ratios");
    }
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);

    const std::size_t n = dataset.size();
    const auto n_train = static_cast<std::size_t>(ratios[0] * n);
    const auto n_val = static_cast<std::size_t>(ratios[1] * n);

    DatasetSplit out;
    out.train.reserve(n_train);
    out.val.reserve(n_val);
    out.test.reserve(n - n_train - n_val);
    for (std::size_t i = 0; i < n; ++i) {
        const DatasetRecord& r = dataset[idx[i]];
        if (i < n_train) out.train.push_back(r);
        else if (i < n_train + n_val) out.val.push_back(r);
        else out.test.push_back(r);
    }
    return out;
}

double mse(const std::vector<double>& gt, const std::vector<double>& pred) {
    if (gt.size() != pred.size()) throw DomainError("mse: length mismatch");
    if (gt.empty()) throw DomainError("mse: need at least one sample");
    double acc = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double d = gt[i] - pred[i];
        acc += d * d;
    }
    return acc / static_cast<double>(gt.size());
}

namespace {

struct NormalizedSet {
    std::vector<std::array<double, 3>> x;
    std::vector<double> t;
};

NormalizedSet normalize_set(const std::vector<DatasetRecord>& rows,
                            const InputNorm& norm, double target_scale) {
    NormalizedSet s;
    s.x.resize(rows.size());
    s.t.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double raw[3] = {rows[i].omega_ref, rows[i].omega_meas,
                               rows[i].iq_pi};
        normalize_input(norm, raw, s.x[i].data());
        s.t[i] = rows[i].delta_iq_gt / target_scale;
    }
    return s;
}

double eval_mse(const TinyFCModel& m, const NormalizedSet& s, Workspace& ws) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double d = forward_normalized(m, s.x[i].data(), ws) - s.t[i];
        acc += d * d;
    }
    return s.x.empty() ? 0.0 : acc / static_cast<double>(s.x.size());
}

struct AdamState {
    std::vector<double> m, v;
    long t = 0;
};

// Applies one optimizer step; grads hold the batch-mean gradient.
void apply_update(TinyFCModel& model, const Gradients& g, AdamState& adam,
                  const TrainConfig& cfg, double lr) {
    auto for_each_param = [&](auto&& fn) {
        std::size_t off = 0;
        for (std::size_t b = 0; b < model.branches.size(); ++b) {
            for (std::size_t l = 0; l < model.branches[b].size(); ++l) {
                Layer& layer = model.branches[b][l];
                const Layer& grad = g.branches[b][l];
                for (std::size_t i = 0; i < layer.w.size(); ++i, ++off)
                    fn(layer.w[i], grad.w[i], off);
                for (std::size_t i = 0; i < layer.b.size(); ++i, ++off)
                    fn(layer.b[i], grad.b[i], off);
            }
        }
        for (std::size_t i = 0; i < model.merge.w.size(); ++i, ++off)
            fn(model.merge.w[i], g.merge.w[i], off);
        fn(model.merge.b[0], g.merge.b[0], off);
        ++off;
    };

    if (cfg.optimizer == TrainConfig::Optimizer::Sgd) {
        for_each_param([&](double& w, double gr, std::size_t) { w -= lr * gr; });
        return;
    }
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    if (adam.m.empty()) {
        adam.m.assign(model.param_count(), 0.0);
        adam.v.assign(model.param_count(), 0.0);
    }
    ++adam.t;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
    for_each_param([&](double& w, double gr, std::size_t off) {
        adam.m[off] = kBeta1 * adam.m[off] + (1.0 - kBeta1) * gr;
        adam.v[off] = kBeta2 * adam.v[off] + (1.0 - kBeta2) * gr * gr;
        const double mh = adam.m[off] / bc1;
        const double vh = adam.v[off] / bc2;
        w -= lr * mh / (std::sqrt(vh) + kEps);
    });
}

TrainHistory train_impl(TinyFCModel& model,
                        const std::vector<DatasetRecord>& dataset,
                        const TrainConfig& cfg, bool refit_norm, double lr) {
    cfg.validate();
    if (dataset.empty()) throw DomainError("train: dataset is empty");
    model.validate();

    DatasetSplit split = split_dataset(dataset, cfg.split, cfg.seed);

    if (refit_norm) {
        InputNorm norm;
        for (int f = 0; f < kTinyFCInputs; ++f) {
            double mean = 0.0;
            for (const auto& r : split.train) {
                const double v = f == 0 ? r.omega_ref
                                 : f == 1 ? r.omega_meas
                                          : r.iq_pi;
                mean += v;
            }
            mean /= static_cast<double>(split.train.size());
            double var = 0.0;
            for (const auto& r : split.train) {
                const double v = f == 0 ? r.omega_ref
                                 : f == 1 ? r.omega_meas
                                          : r.iq_pi;
                var += (v - mean) * (v - mean);
            }
            var /= static_cast<double>(split.train.size());
            norm.mean[f] = mean;
            norm.std[f] = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
        norm.fitted = true;
        model.input_norm = norm;
        // 25% headroom keeps the largest normalized targets away from the
        // tanh asymptote, which a scale of exactly max|target| would hit.
        double scale = 0.0;
        for (const auto& r : split.train) {
            scale = std::max(scale, std::abs(r.delta_iq_gt));
        }
        model.target_scale = scale > 0.0 ? 1.25 * scale : 1.0;
    } else {
        if (!model.input_norm.fitted) {
            throw StateError("fine_tune: model has no fitted normalization");
        }
        double scale = model.target_scale;
        for (const auto& r : split.train) {
            scale = std::max(scale, 1.25 * std::abs(r.delta_iq_gt));
        }
        model.target_scale = scale;
    }

    const NormalizedSet train_set =
        normalize_set(split.train, model.input_norm, model.target_scale);
    const NormalizedSet val_set =
        normalize_set(split.val, model.input_norm, model.target_scale);
    const NormalizedSet test_set =
        normalize_set(split.test, model.input_norm, model.target_scale);

    Workspace ws;
    ws.resize(model);
    Gradients grads;
    grads.init_like(model);
    AdamState adam;
    Rng rng(cfg.seed);

    std::vector<std::size_t> order(train_set.x.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory hist;
    hist.best_val_mse = std::numeric_limits<double>::infinity();
    auto best_branches = model.branches;
    auto best_merge = model.merge;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // linear decay to 10% of the initial rate by the final epoch
        const double lr_epoch =
            cfg.epochs > 1
                ? lr * (1.0 - 0.9 * static_cast<double>(epoch) / (cfg.epochs - 1))
                : lr;
        rng.shuffle(order);
        double sse = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t bs =
                std::min<std::size_t>(cfg.batch_size, order.size() - done);
            grads.zero();
            double batch_sse = 0.0;
            for (std::size_t k = 0; k < bs; ++k) {
                const std::size_t i = order[done + k];
                const double y = forward_normalized(model, train_set.x[i].data(), ws);
                const double err = y - train_set.t[i];
                batch_sse += err * err;
                backward_normalized(model, ws, 2.0 * err / static_cast<double>(bs),
                                    grads);
            }
            sse += batch_sse;
            if (!std::isfinite(batch_sse)) {
                throw TrainDivergedError("train: non-finite loss", epoch);
            }
            apply_update(model, grads, adam, cfg, lr_epoch);
            done += bs;
        }
        EpochStats st;
        st.epoch = epoch;
        st.train_mse = sse / static_cast<double>(order.size());
        st.val_mse = val_set.x.empty() ? st.train_mse : eval_mse(model, val_set, ws);
        if (!std::isfinite(st.val_mse)) {
            throw TrainDivergedError("train: non-finite validation loss", epoch);
        }
        hist.epochs.push_back(st);
        if (st.val_mse < hist.best_val_mse) {
            hist.best_val_mse = st.val_mse;
            hist.best_epoch = epoch;
            best_branches = model.branches;
            best_merge = model.merge;
        }
    }

    model.branches = std::move(best_branches);
    model.merge = std::move(best_merge);
    hist.test_mse = test_set.x.empty() ? hist.best_val_mse
                                       : eval_mse(model, test_set, ws);
    return hist;
}

}  // namespace

TrainHistory train(TinyFCModel& model, const std::vector<DatasetRecord>& dataset,
                   const TrainConfig& cfg) {
    return train_impl(model, dataset, cfg, /*refit_norm=*/true,
                      cfg.learning_rate);
}

TrainHistory fine_tune(TinyFCModel& model,
                       const std::vector<DatasetRecord>& dataset,
                       const TrainConfig& cfg) {
    return train_impl(model, dataset, cfg, /*refit_norm=*/false,
                      0.1 * cfg.learning_rate);
}

std::vector<std::vector<std::vector<double>>> collect_activations(
    const TinyFCModel& model,
    const std::vector<std::array<double, 3>>& inputs) {
    if (!model.input_norm.fitted) {
        throw StateError("collect_activations: unfitted normalization");
    }
    Workspace ws;
    ws.resize(model);
    const std::size_t n = inputs.size();
    std::vector<std::vector<std::vector<double>>> out(model.branches.size());
    for (std::size_t b = 0; b < model.branches.size(); ++b) {
        out[b].resize(model.branches[b].size() + 1);
        for (std::size_t k = 0; k < out[b].size(); ++k) {
            out[b][k].resize(n * ws.act[b][k].size());
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double xn[3];
        normalize_input(model.input_norm, inputs[i].data(), xn);
        forward_normalized(model, xn, ws);
        for (std::size_t b = 0; b < model.branches.size(); ++b) {
            for (std::size_t k = 0; k < ws.act[b].size(); ++k) {
                const auto& a = ws.act[b][k];
                std::copy(a.begin(), a.end(), out[b][k].begin() + i * a.size());
            }
        }
    }
    return out;
}

std::vector<double> flatten_params(const TinyFCModel& model) {
    std::vector<double> flat;
    flat.reserve(model.param_count());
    for (const auto& br : model.branches)
        for (const auto& l : br) {
            flat.insert(flat.end(), l.w.begin(), l.w.end());
            flat.insert(flat.end(), l.b.begin(), l.b.end());
        }
    flat.insert(flat.end(), model.merge.w.begin(), model.merge.w.end());
    flat.insert(flat.end(), model.merge.b.begin(), model.merge.b.end());
    return flat;
}

void unflatten_params(TinyFCModel& model, const std::vector<double>& flat) {
    if (flat.size() != model.param_count()) {
        throw DomainError("unflatten_params: size mismatch");
    }
    std::size_t off = 0;
    for (auto& br : model.branches)
        for (auto& l : br) {
            std::copy_n(flat.begin() + off, l.w.size(), l.w.begin());
            off += l.w.size();
            std::copy_n(flat.begin() + off, l.b.size(), l.b.begin());
            off += l.b.size();
        }
    std::copy_n(flat.begin() + off, model.merge.w.size(), model.merge.w.begin());
    off += model.merge.w.size();
    model.merge.b[0] = flat[off];
}

double batch_loss(const TinyFCModel& model,
                  const std::vector<std::array<double, 4>>& batch) {
    if (!model.input_norm.fitted) throw StateError("batch_loss: unfitted normalization");
    if (batch.empty()) throw DomainError("batch_loss: empty batch");
    Workspace ws;
    ws.resize(model);
    double acc = 0.0;
    for (const auto& s : batch) {
        double xn[3];
        normalize_input(model.input_norm, s.data(), xn);
        const double y = forward_normalized(model, xn, ws);
        const double err = y - s[3] / model.target_scale;
        acc += err * err;
    }
    return acc / static_cast<double>(batch.size());
}

std::vector<double> loss_gradient(const TinyFCModel& model,
                                  const std::vector<std::array<double, 4>>& batch) {
    if (!model.input_norm.fitted) throw StateError("loss_gradient: unfitted normalization");
    if (batch.empty()) throw DomainError("loss_gradient: empty batch");
    Workspace ws;
    ws.resize(model);
    Gradients g;
    g.init_like(model);
    for (const auto& s : batch) {
        double xn[3];
        normalize_input(model.input_norm, s.data(), xn);
        const double y = forward_normalized(model, xn, ws);
        const double err = y - s[3] / model.target_scale;
        backward_normalized(model, ws, 2.0 * err / static_cast<double>(batch.size()), g);
    }
    TinyFCModel tmp = model;
    tmp.branches = g.branches;
    tmp.merge = g.merge;
    return flatten_params(tmp);
}

}  // namespace foclab
