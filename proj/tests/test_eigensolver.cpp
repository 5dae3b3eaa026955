#include "ckada/eigensolver.hpp"
#include "ckada/scatter.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ckada;

namespace {

Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n, double floor = 0.1)
{
    const Eigen::MatrixXd g = support::random_matrix(rng, n, n);
    Eigen::MatrixXd s = g * g.transpose();
    s.diagonal().array() += floor;
    return s;
}

Eigen::MatrixXd random_symmetric(Rng& rng, Eigen::Index n)
{
    const Eigen::MatrixXd g = support::random_matrix(rng, n, n);
    return 0.5 * (g + g.transpose());
}

void expect_invariants(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const EigenResult& res)
{
    for (Eigen::Index k = 1; k < res.values.size(); ++k)
        EXPECT_LE(res.values(k - 1), res.values(k));
    Eigen::MatrixXd breg = b;
    breg.diagonal().array() += res.ridge;
    const Eigen::MatrixXd gram = res.vectors.transpose() * breg * res.vectors;
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(relative_residual(a, b, res), 1e-8);
    for (Eigen::Index k = 0; k < res.vectors.cols(); ++k) {
        Eigen::Index arg = 0;
        res.vectors.col(k).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(res.vectors(arg, k), 0.0);
    }
}

} // namespace

TEST(Gsep, IdentityPencil)
{
    const auto res = gsep_smallest(Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Identity(4, 4), 4, 0.0);
    EXPECT_LT((res.values.array() - 1.0).abs().maxCoeff(), 1e-15);
}

TEST(Gsep, DiagonalPencil)
{
    const Eigen::MatrixXd a = Eigen::Vector3d(3.0, 1.0, 2.0).asDiagonal();
    const auto res = gsep_smallest(a, Eigen::MatrixXd::Identity(3, 3), 2, 0.0);
    EXPECT_NEAR(res.values(0), 1.0, 1e-15);
    EXPECT_NEAR(res.values(1), 2.0, 1e-15);
    EXPECT_LT((res.vectors.col(0) - Eigen::Vector3d::UnitY()).norm(), 1e-15);
    EXPECT_LT((res.vectors.col(1) - Eigen::Vector3d::UnitZ()).norm(), 1e-15);
}

TEST(Gsep, MatchesDenseNonsymmetricSolve)
{
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd a = random_symmetric(rng, 8);
        const Eigen::MatrixXd b = random_spd(rng, 8);
        const auto res = gsep_smallest(a, b, 8, 0.0);
        const auto ref = support::ref_generalized_eigenvalues(a, b);
        EXPECT_LT((res.values - ref).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
        expect_invariants(a, b, res);
    }
}

TEST(Gsep, RandomInvariants)
{
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(99));
        const Eigen::MatrixXd a = random_symmetric(rng, n);
        const Eigen::MatrixXd b = random_spd(rng, n);
        const auto r = static_cast<Eigen::Index>(1 + rng.below(static_cast<std::uint64_t>(n)));
        expect_invariants(a, b, gsep_smallest(a, b, r, rng.uniform(0.0, 1e-3)));
    }
}

TEST(Gsep, IndefiniteBRejected)
{
    const Eigen::MatrixXd b = Eigen::Vector2d(1.0, -1.0).asDiagonal();
    EXPECT_EQ(support::error_of([&] { gsep_smallest(Eigen::MatrixXd::Identity(2, 2), b, 1, 0.0); }),
              ErrorCode::not_positive_definite);
    EXPECT_EQ(support::error_of([&] { gsep_smallest(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2), 3, 0.0); }),
              ErrorCode::invalid_argument);
    EXPECT_EQ(support::error_of([&] { gsep_smallest(Eigen::MatrixXd{{1.0, 2.0}, {0.0, 1.0}}, Eigen::MatrixXd::Identity(2, 2), 1, 0.0); }),
              ErrorCode::invalid_argument);
}

TEST(Gsep, RegularizedPolicyEscalates)
{
    // rank-one b needs a ridge; starting from zero the policy falls back to
    // the default and the result is a valid regularized solve
    const Eigen::Vector3d u(1.0, 2.0, 2.0);
    const Eigen::MatrixXd b = u * u.transpose();
    const auto res = gsep_smallest_regularized(Eigen::MatrixXd::Identity(3, 3), b, 2, 0.0);
    EXPECT_GE(res.ridge, default_ridge(b));
    expect_invariants(Eigen::MatrixXd::Identity(3, 3), b, res);
    EXPECT_DOUBLE_EQ(default_ridge(b), 1e-6 * 9.0 / 3.0);
}

TEST(Gsep, RidgeContinuity)
{
    Rng rng(3);
    const Eigen::MatrixXd a = random_symmetric(rng, 6);
    const Eigen::MatrixXd b = random_spd(rng, 6, 1.0);
    const auto exact = gsep_smallest(a, b, 3, 0.0);
    double previous = 0.0;
    for (double ridge : {1e-12, 1e-10, 1e-8, 1e-6}) {
        const auto res = gsep_smallest(a, b, 3, ridge);
        const double gap = (res.values - exact.values).cwiseAbs().maxCoeff();
        EXPECT_LT(gap, 1e3 * ridge);
        EXPECT_GE(gap + 1e-15, previous);
        previous = gap;
        EXPECT_LT(support::max_principal_angle(res.vectors, exact.vectors), 1e3 * ridge + 1e-12);
    }
}

TEST(InputSpace, EqualPencilHasUnitEigenvalues)
{
    Rng rng(4);
    const Eigen::MatrixXd s = random_spd(rng, 5);
    const auto model = fit_input_space({s, s}, 3, 0.0);
    EXPECT_LT((model.eigenvalues.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(InputSpace, TwoClassProjectionTightensWithinClassAngles)
{
    Rng rng(5);
    std::vector<int> y;
    Eigen::MatrixXd x(40, 2);
    for (int i = 0; i < 40; ++i) {
        y.push_back(i < 20 ? 1 : 2);
        const double angle = (i < 20 ? 0.35 : 1.2) + 0.15 * rng.normal();
        x.row(i) << std::cos(angle), std::sin(angle);
    }
    const auto model = fit_input_space(outer_products_from_weights(x, ada_weights(y)), 1, 0.0);
    const Eigen::VectorXd z = x * model.coefficients.col(0);
    auto mean_cosine = [&](auto cosine) {
        double total = 0.0;
        int pairs = 0;
        for (int i = 0; i < 40; ++i)
            for (int j = i + 1; j < 40; ++j)
                if (y[static_cast<std::size_t>(i)] == y[static_cast<std::size_t>(j)]) {
                    total += cosine(i, j);
                    ++pairs;
                }
        return total / pairs;
    };
    const double raw = mean_cosine([&](int i, int j) { return x.row(i).dot(x.row(j)); });
    const double projected = mean_cosine([&](int i, int j) { return z(i) * z(j) / std::abs(z(i) * z(j)); });
    EXPECT_GT(projected, raw);
}

TEST(KernelEmbedding, ResidualOnRandomInstance)
{
    Rng rng(6);
    const auto y = support::random_labels(rng, 40, 3, 5);
    const Eigen::MatrixXd x = support::random_unit_rows(rng, y, 6);
    const auto k = gram(x, x, {KernelFamily::rbf, median_heuristic_sigma(x)});
    const auto w = lada_weights(y, angular_affinity(x, 7));
    const auto model = fit_kernel_embedding(k, w, 2);
    const Eigen::MatrixXd sb = symmetrized(k.values * w.between * k.values);
    const Eigen::MatrixXd sw = symmetrized(k.values * w.within * k.values);
    EXPECT_LE(relative_residual(sb, sw, {model.eigenvalues, model.coefficients, model.ridge}), 1e-8);
    EXPECT_EQ(model.method, Method::cklada);
    EXPECT_EQ(model.train_coordinates.rows(), 2);
    EXPECT_EQ(model.train_coordinates.cols(), 40);
}

TEST(KernelEmbedding, OutOfSampleConsistency)
{
    Rng rng(7);
    const auto y = support::random_labels(rng, 30, 3, 4);
    const Eigen::MatrixXd x = support::random_unit_rows(rng, y, 5);
    const KernelSpec spec{KernelFamily::rbf, 0.8};
    const auto k = gram(x, x, spec);
    const auto model = fit_kernel_embedding(k, ada_weights(y), 2);
    EXPECT_LT((embed_out_of_sample(model, k) - model.train_coordinates).cwiseAbs().maxCoeff(), 1e-12);
    const auto one = embed_out_of_sample(model, gram(x, x.topRows(1), spec));
    EXPECT_EQ(one.rows(), 2);
    EXPECT_EQ(one.cols(), 1);
    EXPECT_EQ(support::error_of([&] { embed_out_of_sample(model, gram(x.topRows(5), x, spec)); }),
              ErrorCode::shape_mismatch);
}

TEST(KernelEmbedding, LinearKernelOutOfSampleMatchesInputSpaceUpToAlignment)
{
    Rng rng(8);
    const int c = 4, d = 4;
    auto y = support::random_labels(rng, 50, c, 6);
    const Eigen::MatrixXd all = support::random_unit_rows(rng, y, d);
    const Eigen::MatrixXd train = all.topRows(35), test = all.bottomRows(15);
    y.resize(35);
    const auto w = ada_weights(y);
    const auto input = fit_input_space(outer_products_from_weights(train, w), c - 1, 0.0);
    const auto k = gram(train, train, {KernelFamily::linear, 1.0});
    const double tiny = 1e-12 * symmetrized(k.values * w.within * k.values).trace() / 35.0;
    const auto kernel = fit_kernel_embedding(k, w, c - 1, tiny);

    const Eigen::MatrixXd zi = input.coefficients.transpose() * train.transpose();
    const Eigen::MatrixXd zk = kernel.train_coordinates;
    // least-squares alignment zk ~ m zi on the training set
    const Eigen::MatrixXd m = (zi * zi.transpose()).ldlt().solve(zi * zk.transpose()).transpose();
    const Eigen::MatrixXd zk_test = embed_out_of_sample(kernel, gram(train, test, {KernelFamily::linear, 1.0}));
    const Eigen::MatrixXd zi_test = input.coefficients.transpose() * test.transpose();
    EXPECT_LT(support::rel_frobenius(m * zi_test, zk_test), 1e-6);
}

TEST(KernelEmbedding, PermutingTrainingSamples)
{
    Rng rng(9);
    const auto y = support::random_labels(rng, 24, 3, 4);
    const Eigen::MatrixXd x = support::random_unit_rows(rng, y, 4);
    const Eigen::MatrixXd q = support::random_unit_rows(rng, {1, 2, 3, 1, 2}, 4);
    std::vector<Eigen::Index> perm(24);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Eigen::MatrixXd xp(24, 4);
    std::vector<int> yp;
    for (Eigen::Index i = 0; i < 24; ++i) {
        xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
        yp.push_back(y[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
    }
    const KernelSpec spec{KernelFamily::rbf, 0.9};
    const auto a = fit_kernel_embedding(gram(x, x, spec), lada_weights(y, angular_affinity(x, 5)), 2, 1e-6);
    const auto b = fit_kernel_embedding(gram(xp, xp, spec), lada_weights(yp, angular_affinity(xp, 5)), 2, 1e-6);
    for (Eigen::Index i = 0; i < 24; ++i)
        EXPECT_LT((b.coefficients.row(i) - a.coefficients.row(perm[static_cast<std::size_t>(i)])).norm(),
                  1e-6 * a.coefficients.norm());
    const Eigen::MatrixXd ta = embed_out_of_sample(a, gram(x, q, spec));
    const Eigen::MatrixXd tb = embed_out_of_sample(b, gram(xp, q, spec));
    EXPECT_LT(support::rel_frobenius(tb, ta), 1e-6);
}

TEST(KernelEmbedding, RankWarning)
{
    const Eigen::MatrixXd x{{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}};
    const auto k = gram(x, x, {KernelFamily::linear, 1.0});
    EXPECT_TRUE(fit_kernel_embedding(k, ada_weights({1, 2, 1, 2}), 3).rank_warning);
    EXPECT_FALSE(fit_kernel_embedding(k, ada_weights({1, 2, 1, 2}), 1).rank_warning);
}

TEST(Kpca, LinearKernelMatchesPca)
{
    Rng rng(10);
    Eigen::MatrixXd x = support::random_matrix(rng, 5, 3);
    x.rowwise() -= x.colwise().mean();
    const auto model = fit_kpca_baseline(x, {KernelFamily::linear, 1.0}, 2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pca(x.transpose() * x);
    for (int j = 0; j < 2; ++j) {
        const Eigen::VectorXd scores = x * pca.eigenvectors().col(2 - j);
        const Eigen::VectorXd got = model.train_coordinates.row(j).transpose();
        EXPECT_LT(std::min((got - scores).norm(), (got + scores).norm()), 1e-10);
    }
}

TEST(Kpca, DominantDirection)
{
    Rng rng(11);
    const Eigen::Vector3d dir = Eigen::Vector3d(1.0, -2.0, 0.5).normalized();
    Eigen::MatrixXd x(60, 3);
    for (Eigen::Index i = 0; i < 60; ++i)
        x.row(i) = (5.0 * rng.normal() * dir + 0.1 * support::random_matrix(rng, 3, 1)).transpose();
    const auto model = fit_kpca_baseline(x, {KernelFamily::rbf, 20.0}, 1);
    const Eigen::VectorXd proj = x * dir;
    const Eigen::VectorXd got = model.train_coordinates.row(0).transpose();
    const Eigen::VectorXd a = got.array() - got.mean(), b = proj.array() - proj.mean();
    EXPECT_GT(std::abs(a.dot(b)) / (a.norm() * b.norm()), 0.99);
}

TEST(Kpca, DuplicateSamplesShareCoordinates)
{
    Rng rng(12);
    Eigen::MatrixXd x = support::random_matrix(rng, 10, 4);
    x.row(7) = x.row(2);
    const auto model = fit_kpca_baseline(x, {KernelFamily::rbf, 1.5}, 3);
    EXPECT_LT((model.train_coordinates.col(7) - model.train_coordinates.col(2)).norm(), 1e-10);
    const auto out = embed_out_of_sample(model, gram(x, x, {KernelFamily::rbf, 1.5}));
    EXPECT_LT((out - model.train_coordinates).cwiseAbs().maxCoeff(), 1e-10);
}
