#pragma once

#include "protosel/dataset.hpp"
#include "protosel/dissim.hpp"
#include "protosel/error.hpp"
#include "protosel/matrix.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace protosel {

/// A selected representation set and where it came from.
struct PrototypeSet {
    std::vector<std::size_t> indices;
    std::string method;
    std::uint64_t seed = 0;
    /// Per-generation (or per-step / per-iteration) criterion values; may be empty.
    std::vector<double> fitness_trace;

    std::size_t size() const noexcept { return indices.size(); }
};

inline void validate_prototypes(const PrototypeSet& protos, std::size_t n) {
    require(!protos.indices.empty(), ErrorKind::InvalidArgument, "prototype set is empty");
    std::unordered_set<std::size_t> seen;
    for (auto i : protos.indices) {
        require(i < n, ErrorKind::OutOfRange, "prototype index " + std::to_string(i) + " out of range");
        require(seen.insert(i).second, ErrorKind::InvalidArgument,
                "duplicate prototype index " + std::to_string(i));
    }
}

/// Objects mapped to their dissimilarities to the prototypes: row a, column j
/// holds d(objects[a], prototypes[j]).
struct Embedding {
    Matrix vectors;
    PrototypeSet prototypes;

    std::size_t rows() const noexcept { return vectors.rows(); }
    std::size_t dimension() const noexcept { return vectors.cols(); }
};

inline Embedding embed(const DissimilarityProvider& provider, std::span<const std::size_t> objects,
                       const PrototypeSet& protos) {
    validate_prototypes(protos, provider.size());
    return {provider.dist_block(objects, protos.indices), protos};
}

namespace detail {

inline double squared_euclidean(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

} // namespace detail

/// 1-NN in the dissimilarity space (Euclidean); ties go to the lowest train row.
inline std::vector<std::string> classify_1nn(const Embedding& train, std::span<const std::string> train_labels,
                                             const Embedding& test) {
    require(train.rows() >= 1, ErrorKind::InvalidArgument, "1-NN needs a nonempty training set");
    require(train_labels.size() == train.rows(), ErrorKind::InvalidArgument, "train label count mismatch");
    require(train.dimension() == test.dimension(), ErrorKind::InvalidArgument,
            "dimension mismatch: train k=" + std::to_string(train.dimension()) +
                ", test k=" + std::to_string(test.dimension()));
    std::vector<std::string> out;
    out.reserve(test.rows());
    for (std::size_t t = 0; t < test.rows(); ++t) {
        const auto x = test.vectors.row(t);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < train.rows(); ++r) {
            const double d = detail::squared_euclidean(x, train.vectors.row(r));
            if (d < best_d) {
                best_d = d;
                best = r;
            }
        }
        out.push_back(train_labels[best]);
    }
    return out;
}

/// Gaussian linear discriminant with a shared pooled covariance, ridge
/// regularized by reg*I. Without `reg`, uses 1e-6 * trace(pooled) / k.
/// Class priors are the training frequencies; ties go to the first class in
/// sorted token order.
class LinearDiscriminant {
public:
    LinearDiscriminant(const Embedding& train, std::span<const std::string> labels,
                       std::optional<double> reg = std::nullopt) {
        require(labels.size() == train.rows(), ErrorKind::InvalidArgument, "train label count mismatch");
        require(!reg || *reg >= 0.0, ErrorKind::InvalidArgument, "regularization must be >= 0");
        const std::size_t k = train.dimension();
        const std::size_t n = train.rows();

        std::map<std::string, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
        require(by_class.size() >= 2, ErrorKind::InvalidArgument, "LDC needs at least two classes");

        Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
        std::vector<Eigen::VectorXd> means;
        for (const auto& [label, members] : by_class) {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
            for (auto i : members) mean += row(train, i);
            mean /= static_cast<double>(members.size());
            for (auto i : members) {
                const Eigen::VectorXd c = row(train, i) - mean;
                pooled.noalias() += c * c.transpose();
            }
            classes_.push_back(label);
            means.push_back(std::move(mean));
            log_priors_.push_back(std::log(static_cast<double>(members.size()) / static_cast<double>(n)));
        }
        const double dof = n > by_class.size() ? static_cast<double>(n - by_class.size()) : 1.0;
        pooled /= dof;

        const double ridge = reg ? *reg : 1e-6 * pooled.trace() / static_cast<double>(k);
        pooled.diagonal().array() += ridge;

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pooled);
        const double max_ev = eig.eigenvalues().cwiseAbs().maxCoeff();
        require(eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 1e-12 * std::max(max_ev, 1e-300),
                ErrorKind::Degenerate,
                "pooled covariance is singular (regularization " + detail::format_double(ridge) +
                    "); use a positive regularization");

        const Eigen::LDLT<Eigen::MatrixXd> solver(pooled);
        for (std::size_t c = 0; c < classes_.size(); ++c) {
            Eigen::VectorXd w = solver.solve(means[c]);
            offsets_.push_back(-0.5 * means[c].dot(w) + log_priors_[c]);
            weights_.push_back(std::move(w));
        }
    }

    const std::vector<std::string>& classes() const noexcept { return classes_; }

    std::vector<double> scores(std::span<const double> x) const {
        Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
        std::vector<double> s(classes_.size());
        for (std::size_t c = 0; c < classes_.size(); ++c) s[c] = weights_[c].dot(v) + offsets_[c];
        return s;
    }

    std::vector<std::string> predict(const Embedding& test) const {
        require(weights_.empty() || test.dimension() == static_cast<std::size_t>(weights_.front().size()),
                ErrorKind::InvalidArgument, "dimension mismatch between LDC and test embedding");
        std::vector<std::string> out;
        out.reserve(test.rows());
        for (std::size_t t = 0; t < test.rows(); ++t) {
            const auto s = scores(test.vectors.row(t));
            out.push_back(classes_[static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin())]);
        }
        return out;
    }

private:
    static Eigen::VectorXd row(const Embedding& e, std::size_t i) {
        const auto r = e.vectors.row(i);
        return Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    }

    std::vector<std::string> classes_;
    std::vector<double> log_priors_;
    std::vector<Eigen::VectorXd> weights_;
    std::vector<double> offsets_;
};

inline std::vector<std::string> classify_ldc(const Embedding& train, std::span<const std::string> train_labels,
                                             const Embedding& test, std::optional<double> reg = std::nullopt) {
    require(train.dimension() == test.dimension(), ErrorKind::InvalidArgument,
            "dimension mismatch: train k=" + std::to_string(train.dimension()) +
                ", test k=" + std::to_string(test.dimension()));
    return LinearDiscriminant(train, train_labels, reg).predict(test);
}

inline double error_rate(std::span<const std::string> predicted, std::span<const std::string> truth) {
    require(predicted.size() == truth.size(), ErrorKind::InvalidArgument,
            "length mismatch: " + std::to_string(predicted.size()) + " predictions vs " +
                std::to_string(truth.size()) + " labels");
    if (truth.empty()) return 0.0;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

/// One row per object: p0..p{k-1} then the label.
inline void save_embedding_csv(const Embedding& e, std::span<const std::string> labels,
                               const std::filesystem::path& path) {
    require(labels.size() == e.rows(), ErrorKind::InvalidArgument, "label count mismatch");
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    for (std::size_t j = 0; j < e.dimension(); ++j) out << 'p' << j << ',';
    out << "label\n";
    for (std::size_t i = 0; i < e.rows(); ++i) {
        for (double v : e.vectors.row(i)) out << detail::format_double(v) << ',';
        out << detail::csv_escape(labels[i]) << '\n';
    }
}

} // namespace protosel
