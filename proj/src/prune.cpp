#include "foclab/prune.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "foclab/errors.hpp"

namespace foclab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajorMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Kept-neuron subset of size k via column-pivoted QR on the leading
// eigenvector rows (PCA-guided variable selection).
std::vector<int> select_neurons(const MatrixXd& topk_eigvecs, int k) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(topk_eigvecs.transpose().eval());
    const auto& perm = qr.colsPermutation().indices();
    std::vector<int> kept(k);
    for (int i = 0; i < k; ++i) kept[i] = perm(i);
    std::sort(kept.begin(), kept.end());
    return kept;
}

// Replaces columns [offset, offset+m) of `consumer` with the kept columns
// plus the regression fold of the removed ones: removed_col ~= sum_i beta(i)
// * kept_col_i + intercept.
void fold_consumer_columns(Layer& consumer, int offset, int m,
                           const std::vector<int>& kept,
                           const std::vector<int>& removed, const MatrixXd& beta) {
    const int rows = consumer.spec.out_width;
    const int cols = consumer.spec.in_width;
    const int k = static_cast<int>(kept.size());
    ConstRowMajorMap w(consumer.w.data(), rows, cols);

    // destination index of every surviving column
    std::vector<int> dst(cols, -1);
    int next = 0;
    for (int c = 0; c < cols; ++c) {
        const int local = c - offset;
        if (local >= 0 && local < m &&
            std::binary_search(removed.begin(), removed.end(), local)) {
            continue;
        }
        dst[c] = next++;
    }

    MatrixXd folded = MatrixXd::Zero(rows, next);
    for (int c = 0; c < cols; ++c) {
        if (dst[c] >= 0) folded.col(dst[c]) = w.col(c);
    }
    for (std::size_t r = 0; r < removed.size(); ++r) {
        const VectorXd wr = w.col(offset + removed[r]);
        for (int i = 0; i < k; ++i) {
            folded.col(dst[offset + kept[i]]) += wr * beta(i, r);
        }
        for (int i = 0; i < rows; ++i) {
            consumer.b[i] += wr(i) * beta(k, r);
        }
    }
    consumer.spec.in_width = next;
    consumer.w.resize(static_cast<std::size_t>(rows) * next);
    RowMajorMap(consumer.w.data(), rows, next) = folded;
}

// Keeps only the selected output rows of `producer`.
void truncate_producer_rows(Layer& producer, const std::vector<int>& kept) {
    const int cols = producer.spec.in_width;
    const int k = static_cast<int>(kept.size());
    ConstRowMajorMap w(producer.w.data(), producer.spec.out_width, cols);
    MatrixXd kept_rows(k, cols);
    std::vector<double> kept_bias(k);
    for (int i = 0; i < k; ++i) {
        kept_rows.row(i) = w.row(kept[i]);
        kept_bias[i] = producer.b[kept[i]];
    }
    producer.spec.out_width = k;
    producer.w.resize(static_cast<std::size_t>(k) * cols);
    RowMajorMap(producer.w.data(), k, cols) = kept_rows;
    producer.b = kept_bias;
}

}  // namespace

void PruneConfig::validate() const {
    if (!(energy_threshold > 0.0) || energy_threshold > 1.0) {
        throw ConfigError("prune: energy_threshold must be in (0, 1]");
    }
}

TinyFCModel pca_prune(const TinyFCModel& model,
                      const std::vector<std::array<double, 3>>& calibration_inputs,
                      const PruneConfig& cfg) {
    cfg.validate();
    model.validate();
    if (cfg.energy_threshold == 1.0) return model;  // full variance retained

    int widest = 1;
    for (const auto& br : model.branches)
        for (const auto& l : br) widest = std::max(widest, l.spec.out_width);
    if (calibration_inputs.size() < 10 * static_cast<std::size_t>(widest)) {
        throw DomainError("prune: calibration set must be >= 10x the widest layer");
    }

    const auto acts = collect_activations(model, calibration_inputs);
    const auto n = static_cast<Eigen::Index>(calibration_inputs.size());

    TinyFCModel out = model;

    for (std::size_t b = 0; b < out.branches.size(); ++b) {
        auto& branch = out.branches[b];
        const int n_acts = static_cast<int>(branch.size()) + 1;

        // Identity skips force source and target activations into one group.
        UnionFind uf(n_acts);
        for (std::size_t l = 0; l < branch.size(); ++l) {
            if (branch[l].spec.residual_from) {
                uf.unite(*branch[l].spec.residual_from, static_cast<int>(l) + 1);
            }
        }
        std::vector<std::vector<int>> groups(n_acts);
        for (int a = 1; a < n_acts; ++a) {
            if (uf.find(a) == uf.find(0)) continue;  // tied to the input: skip
            groups[uf.find(a)].push_back(a);
        }

        for (const auto& group : groups) {
            if (group.empty()) continue;
            const int m = branch[group.front() - 1].spec.out_width;
            if (m < 2) continue;

            // The energy rule runs per hidden layer; activations tied by a
            // skip then keep the union of their subsets so the identity add
            // stays aligned.
            std::vector<bool> keep_mask(m, false);
            for (int a : group) {
                ConstRowMajorMap amat(acts[b][a].data(), n, m);
                MatrixXd z(n, m);
                for (int c = 0; c < m; ++c) {
                    const double mean = amat.col(c).mean();
                    const double var = (amat.col(c).array() - mean).square().sum() /
                                       std::max<double>(1, n - 1);
                    if (var > 1e-24) {
                        z.col(c) = (amat.col(c).array() - mean) / std::sqrt(var);
                    } else {
                        z.col(c).setZero();
                    }
                }
                const MatrixXd cov =
                    (z.transpose() * z) / static_cast<double>(z.rows() - 1);
                Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
                VectorXd lam = eig.eigenvalues().reverse();
                for (int i = 0; i < lam.size(); ++i) lam(i) = std::max(lam(i), 0.0);
                const double total = lam.sum();

                int k = m;
                if (total > 0.0) {
                    double cum = 0.0;
                    for (int i = 0; i < m; ++i) {
                        cum += lam(i);
                        if (cum >= cfg.energy_threshold * total) {
                            k = i + 1;
                            break;
                        }
                    }
                }
                k = std::max(k, 1);
                if (k >= m) {
                    std::fill(keep_mask.begin(), keep_mask.end(), true);
                    break;
                }
                MatrixXd topk(m, k);
                for (int i = 0; i < k; ++i) {
                    topk.col(i) = eig.eigenvectors().col(m - 1 - i);
                }
                for (int idx : select_neurons(topk, k)) keep_mask[idx] = true;
            }

            std::vector<int> kept, removed;
            for (int c = 0; c < m; ++c) {
                if (keep_mask[c]) kept.push_back(c);
                else removed.push_back(c);
            }
            if (removed.empty()) continue;
            const int k = static_cast<int>(kept.size());

            for (int a : group) {
                // Regression of the removed activations onto the kept ones
                // (plus intercept), on this activation's calibration data.
                ConstRowMajorMap amat(acts[b][a].data(), n, m);
                MatrixXd x(n, k + 1);
                for (int i = 0; i < k; ++i) x.col(i) = amat.col(kept[i]);
                x.col(k).setOnes();
                MatrixXd rhs(n, static_cast<Eigen::Index>(removed.size()));
                for (std::size_t i = 0; i < removed.size(); ++i) {
                    rhs.col(i) = amat.col(removed[i]);
                }
                const MatrixXd beta = x.colPivHouseholderQr().solve(rhs);

                if (a < static_cast<int>(branch.size())) {
                    fold_consumer_columns(branch[a], 0, m, kept, removed, beta);
                } else {
                    int offset = 0;
                    for (std::size_t bb = 0; bb < b; ++bb) {
                        offset += out.branches[bb].back().spec.out_width;
                    }
                    fold_consumer_columns(out.merge, offset, m, kept, removed, beta);
                }
                truncate_producer_rows(branch[a - 1], kept);
            }
        }
    }
    out.validate();
    return out;
}

}  // namespace foclab
