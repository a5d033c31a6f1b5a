#include <gtest/gtest.h>

#include "oracles.hpp"
#include "uzawa/problem_gen.hpp"
#include "uzawa/random.hpp"
#include "uzawa/saddle_system.hpp"

using namespace uzawa;

namespace {

SaddleSystem<double> scalar_example() {
  return make_saddle_system(from_dense((MatrixX<double>(1, 1) << 2).finished()),
                            from_dense((MatrixX<double>(1, 1) << 1).finished()),
                            SparseMatrix<double>(1, 1), (VectorX<double>(1) << 2).finished(),
                            (VectorX<double>(1) << 0).finished());
}

}  // namespace

TEST(SaddleSystem, ScalarSchurComplement) {
  const auto sys = scalar_example();
  const SchurOperator<double> op(sys);
  EXPECT_DOUBLE_EQ(schur_rhs(op)[0], 1.0);
  EXPECT_DOUBLE_EQ(schur_apply(op, (VectorX<double>(1) << 1).finished())[0], 0.5);
}

TEST(SaddleSystem, KktLayout) {
  MatrixX<double> a(2, 2), b(1, 2), c(1, 1);
  a << 4, 1, -1, 3;
  b << 1, 2;
  c << 0.5;
  const auto sys = make_saddle_system(from_dense(a), from_dense(b), from_dense(c),
                                      VectorX<double>::Ones(2).eval(), VectorX<double>::Ones(1).eval());
  MatrixX<double> expect(3, 3);
  expect << 4, 1, 1, -1, 3, 2, 1, 2, -0.5;
  EXPECT_EQ(to_dense(assemble_kkt(sys)), expect);
}

TEST(SaddleSystem, ResidualVanishesAtDirectSolution) {
  const auto sys = gen_linear_vi({.n = 12, .m = 5, .seed = 3});
  const auto [x, y] = oracle::kkt_solve(sys);
  const auto r = residual(sys, Eigen::Map<const VectorX<double>>(x.data(), Index(x.size())).eval(),
                          Eigen::Map<const VectorX<double>>(y.data(), Index(y.size())).eval());
  EXPECT_LE(r.norm(), 1e-12);
  EXPECT_LE(r.inf_norm(), r.norm());
}

TEST(SaddleSystem, SchurOperatorMatchesReference) {
  const auto sys = gen_oseen({.grid_nx = 4, .grid_ny = 4, .viscosity = 0.1, .stabilization = 0.25});
  const SchurOperator<double> op(sys);
  const auto s = oracle::schur(sys);
  Rng rng(5);
  const VectorX<double> v = random_normal<double>(rng, sys.m());
  const auto sv = oracle::vec(op.apply(v));
  const auto ref = oracle::matvec(s, oracle::vec(v));
  EXPECT_LE(oracle::norm(oracle::sub(sv, ref)), 1e-12 * oracle::norm(ref));
}

TEST(SaddleSystem, SchurOfSkewFreeSystemIsPositiveDefinite) {
  const auto sys = gen_linear_vi({.n = 16, .m = 6, .seed = 2, .skew_scale = 0.0});
  const auto ev = oracle::sym_eigenvalues(oracle::sym_part(oracle::schur(sys)));
  EXPECT_GT(ev.front(), 0.0);
}

TEST(SaddleSystem, ValidationErrors) {
  const auto id2 = SparseMatrix<double>::identity(2);
  const VectorX<double> f = VectorX<double>::Zero(2), h1 = VectorX<double>::Zero(1);
  // more constraints than unknowns
  EXPECT_THROW((void)make_saddle_system(SparseMatrix<double>::identity(1), SparseMatrix<double>(2, 1),
                                        SparseMatrix<double>(2, 2), VectorX<double>::Zero(1).eval(), f),
               DimensionError);
  // wrong f length
  EXPECT_THROW((void)make_saddle_system(id2, SparseMatrix<double>(1, 2), SparseMatrix<double>(1, 1),
                                        h1, h1),
               DimensionError);
  // nonsymmetric C
  const auto c = from_triplets<double>(2, 2, std::vector<Triplet<double>>{{0, 1, 1.0}});
  EXPECT_THROW((void)make_saddle_system(id2, id2, c, f, f), HypothesisError);
}
