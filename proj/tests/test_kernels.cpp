#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "docsimp/kernels.hpp"
#include "docsimp/rng.hpp"
#include "docsimp/tape.hpp"
#include "doctest.h"

using namespace docsimp;

namespace {

Mat<float> random_mat(int r, int c, uint64_t seed) {
    Mat<float> m(r, c);
    Rng rng(seed);
    for (auto& v : m.a) v = static_cast<float>(rng.normal());
    return m;
}

Mat<double> random_matd(int r, int c, uint64_t seed) {
    Mat<double> m(r, c);
    Rng rng(seed);
    for (auto& v : m.a) v = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("gemm_nn hand values") {
    Mat<float> a(2, 3), b(3, 2), c(2, 2);
    float av[] = {1, 2, 3, 4, 5, 6};
    float bv[] = {7, 8, 9, 10, 11, 12};
    std::copy(av, av + 6, a.a.begin());
    std::copy(bv, bv + 6, b.a.begin());
    kernels::serial::gemm_nn(a, b, c);
    CHECK(c(0, 0) == 58.0f);   // 1*7 + 2*9 + 3*11
    CHECK(c(0, 1) == 64.0f);
    CHECK(c(1, 0) == 139.0f);
    CHECK(c(1, 1) == 154.0f);

    // acc accumulates on top of the existing values.
    kernels::serial::gemm_nn(a, b, c, /*acc=*/true);
    CHECK(c(0, 0) == 116.0f);

    Mat<float> bad(4, 2);
    CHECK_THROWS_AS(kernels::serial::gemm_nn(a, bad, c), std::invalid_argument);
}

TEST_CASE("gemm_nt and gemm_tn hand values") {
    Mat<float> a(2, 2), b(2, 2);
    a(0, 0) = 1; a(0, 1) = 2; a(1, 0) = 3; a(1, 1) = 4;
    b(0, 0) = 5; b(0, 1) = 6; b(1, 0) = 7; b(1, 1) = 8;

    Mat<float> nt(2, 2);
    kernels::serial::gemm_nt(a, b, nt);  // a * b^T
    CHECK(nt(0, 0) == 17.0f);  // 1*5 + 2*6
    CHECK(nt(0, 1) == 23.0f);
    CHECK(nt(1, 0) == 39.0f);
    CHECK(nt(1, 1) == 53.0f);

    Mat<float> tn(2, 2);
    kernels::serial::gemm_tn(a, b, tn);  // a^T * b
    CHECK(tn(0, 0) == 26.0f);  // 1*5 + 3*7
    CHECK(tn(0, 1) == 30.0f);
    CHECK(tn(1, 0) == 38.0f);
    CHECK(tn(1, 1) == 44.0f);
}

TEST_CASE("serial and parallel kernels agree bitwise above the fork threshold") {
    // 64^3 work = 262144 > kParGrain, so the parallel variants actually fork.
    const int n = 64;
    REQUIRE(static_cast<long>(n) * n * n > kernels::kParGrain);
    const Mat<float> a = random_mat(n, n, 1);
    const Mat<float> b = random_mat(n, n, 2);

    Mat<float> cs(n, n), cp(n, n);
    kernels::serial::gemm_nn(a, b, cs);
    kernels::par::gemm_nn(a, b, cp);
    CHECK(cs == cp);

    kernels::serial::gemm_nt(a, b, cs);
    kernels::par::gemm_nt(a, b, cp);
    CHECK(cs == cp);

    kernels::serial::gemm_tn(a, b, cs);
    kernels::par::gemm_tn(a, b, cp);
    CHECK(cs == cp);

    // Elementwise kernels past the grain: 128 x 128 = 16384 elements.
    const Mat<float> x = random_mat(128, 128, 3);
    const Mat<float> y = random_mat(128, 128, 4);
    Mat<float> os(128, 128), op(128, 128);
    kernels::serial::add(x, y, os);
    kernels::par::add(x, y, op);
    CHECK(os == op);
    kernels::serial::relu(x, os);
    kernels::par::relu(x, op);
    CHECK(os == op);
    kernels::serial::softmax_rows(x, os);
    kernels::par::softmax_rows(x, op);
    CHECK(os == op);
    Mat<float> g(1, 128), be(1, 128);
    g.fill(1.0f);
    kernels::serial::layer_norm_rows(x, g, be, os, 1e-5f);
    kernels::par::layer_norm_rows(x, g, be, op, 1e-5f);
    CHECK(os == op);
}

TEST_CASE("dispatch honors the mode switch") {
    const Mat<float> a = random_mat(8, 8, 5);
    const Mat<float> b = random_mat(8, 8, 6);
    Mat<float> c1(8, 8), c2(8, 8);
    kernels::set_mode(kernels::Mode::serial);
    CHECK(kernels::mode() == kernels::Mode::serial);
    kernels::gemm_nn(a, b, c1);
    kernels::set_mode(kernels::Mode::parallel);
    CHECK(kernels::mode() == kernels::Mode::parallel);
    kernels::gemm_nn(a, b, c2);
    CHECK(c1 == c2);
}

TEST_CASE("softmax rows sum to one and masked entries underflow to exact zero") {
    Mat<float> x = random_mat(6, 10, 7);
    x(2, 3) += -1e30f;  // additive mask convention
    x(2, 7) += -1e30f;
    Mat<float> out(6, 10);
    kernels::serial::softmax_rows(x, out);
    for (int i = 0; i < 6; ++i) {
        float s = 0.0f;
        for (int j = 0; j < 10; ++j) s += out(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(out(2, 3) == 0.0f);
    CHECK(out(2, 7) == 0.0f);
}

TEST_CASE("layer norm hand values") {
    Mat<float> x(1, 3);
    x(0, 0) = 1.0f; x(0, 1) = 2.0f; x(0, 2) = 3.0f;
    Mat<float> g(1, 3), b(1, 3), out(1, 3);
    g.fill(1.0f);
    kernels::serial::layer_norm_rows(x, g, b, out, 0.0f);
    // mean 2, var 2/3, rstd = sqrt(3/2)
    const float rstd = std::sqrt(1.5f);
    CHECK(out(0, 0) == doctest::Approx(-rstd).epsilon(1e-6));
    CHECK(out(0, 1) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(out(0, 2) == doctest::Approx(rstd).epsilon(1e-6));

    // gamma scales, beta shifts.
    g(0, 0) = 2.0f;
    b(0, 0) = 1.0f;
    kernels::serial::layer_norm_rows(x, g, b, out, 0.0f);
    CHECK(out(0, 0) == doctest::Approx(-2.0f * rstd + 1.0f).epsilon(1e-6));
}

// ------------------------------------------------------- tape gradients

namespace {

// Central finite differences for every entry of every listed parameter.
// build must re-read the parameter values each call and end in a 1x1 node.
template <typename BuildFn>
void check_grads(const std::vector<Param<double>*>& params, BuildFn build,
                 double tol = 1e-6) {
    Tape<double> t(/*grad_enabled=*/true);
    const auto loss = build(t);
    REQUIRE(t.val(loss).size() == 1);
    for (auto* p : params) {
        p->ensure_grad();
        p->grad.zero();
    }
    t.backward(loss);
    const double h = 1e-6;
    for (auto* p : params) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value.a[i];
            p->value.a[i] = orig + h;
            Tape<double> tp(false);
            const double fp = tp.val(build(tp)).a[0];
            p->value.a[i] = orig - h;
            Tape<double> tm(false);
            const double fm = tm.val(build(tm)).a[0];
            p->value.a[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = p->grad.a[i];
            const double scale = std::max({1.0, std::abs(fd), std::abs(an)});
            INFO(p->name << "[" << i << "] fd=" << fd << " analytic=" << an);
            CHECK(std::abs(fd - an) <= tol * scale);
        }
    }
}

Param<double> make_param(const std::string& name, int r, int c, uint64_t seed,
                         double shift = 0.0) {
    Param<double> p;
    p.name = name;
    p.value = random_matd(r, c, seed);
    for (auto& v : p.value.a) v += shift;
    return p;
}

// Collapses any node to 1x1: row means then a fixed projection.
Tape<double>::Id to_scalar(Tape<double>& t, Tape<double>::Id x, uint64_t seed) {
    const auto m = t.mean_rows(x);
    Mat<double> w = random_matd(t.val(m).cols, 1, seed);
    return t.matmul(m, t.input(std::move(w)));
}

}  // namespace

TEST_CASE("tape gradients match finite differences") {
    SUBCASE("matmul") {
        auto a = make_param("a", 3, 4, 11);
        auto b = make_param("b", 4, 2, 12);
        check_grads({&a, &b}, [&](Tape<double>& t) {
            return to_scalar(t, t.matmul(t.leaf(a), t.leaf(b)), 99);
        });
    }
    SUBCASE("matmul_nt") {
        auto a = make_param("a", 3, 4, 13);
        auto b = make_param("b", 2, 4, 14);
        check_grads({&a, &b}, [&](Tape<double>& t) {
            return to_scalar(t, t.matmul_nt(t.leaf(a), t.leaf(b)), 99);
        });
    }
    SUBCASE("add and add_rowvec and mul_const") {
        auto a = make_param("a", 3, 4, 15);
        auto b = make_param("b", 3, 4, 16);
        auto c = make_param("c", 1, 4, 17);
        check_grads({&a, &b, &c}, [&](Tape<double>& t) {
            const auto s = t.add(t.leaf(a), t.leaf(b));
            return to_scalar(t, t.mul_const(t.add_rowvec(s, t.leaf(c)), 1.7), 99);
        });
    }
    SUBCASE("relu away from the kink") {
        auto a = make_param("a", 3, 4, 18, 0.5);  // |values| comfortably > h
        for (auto& v : a.value.a)
            if (std::abs(v) < 1e-2) v = 0.5;
        check_grads({&a}, [&](Tape<double>& t) {
            return to_scalar(t, t.relu(t.leaf(a)), 99);
        });
    }
    SUBCASE("layer_norm") {
        auto x = make_param("x", 3, 5, 19);
        auto g = make_param("g", 1, 5, 20, 1.0);
        auto b = make_param("b", 1, 5, 21);
        check_grads({&x, &g, &b}, [&](Tape<double>& t) {
            return to_scalar(t, t.layer_norm(t.leaf(x), t.leaf(g), t.leaf(b)), 99);
        });
    }
    SUBCASE("softmax_rows") {
        auto x = make_param("x", 3, 5, 22);
        check_grads({&x}, [&](Tape<double>& t) {
            return to_scalar(t, t.softmax_rows(t.leaf(x)), 99);
        });
    }
    SUBCASE("add_mask keeps gradients flowing") {
        auto x = make_param("x", 2, 3, 23);
        Mat<double> mask(2, 3);
        mask(0, 1) = -5.0;
        check_grads({&x}, [&](Tape<double>& t) {
            return to_scalar(t, t.softmax_rows(t.add_mask(t.leaf(x), mask)), 99);
        });
    }
    SUBCASE("gather concat slice mean") {
        auto e = make_param("e", 5, 4, 24);
        check_grads({&e}, [&](Tape<double>& t) {
            const auto g1 = t.gather_rows(t.leaf(e), {0, 2, 2, 4});
            const auto g2 = t.gather_rows(t.leaf(e), {1, 3});
            const auto cat = t.concat_rows({g1, g2});
            const auto cc = t.concat_cols({t.slice_cols(cat, 0, 2), t.slice_cols(cat, 2, 2)});
            const auto sl = t.slice_rows(cc, 1, 4);
            return to_scalar(t, t.mean_rows(sl), 99);
        });
    }
    SUBCASE("add_n") {
        auto a = make_param("a", 2, 3, 25);
        auto b = make_param("b", 2, 3, 26);
        auto c = make_param("c", 2, 3, 27);
        check_grads({&a, &b, &c}, [&](Tape<double>& t) {
            return to_scalar(t, t.add_n({t.leaf(a), t.leaf(b), t.leaf(c)}), 99);
        });
    }
    SUBCASE("cross_entropy_sum with skipped rows") {
        auto x = make_param("x", 4, 5, 28);
        const std::vector<int> targets = {2, -1, 0, 4};  // row 1 skipped
        const std::vector<double> weights = {1.0, 1.0, 0.5, 2.0};
        check_grads({&x}, [&](Tape<double>& t) {
            return t.cross_entropy_sum(t.leaf(x), targets, weights);
        });
    }
}

TEST_CASE("tape guard rails") {
    Tape<double> t(/*grad_enabled=*/false);
    auto p = make_param("p", 2, 2, 30);
    const auto x = t.leaf(p);
    CHECK_THROWS_AS(t.backward(x), std::logic_error);

    Tape<double> tg(true);
    const auto y = tg.leaf(p);  // 2x2, not scalar
    CHECK_THROWS_AS(tg.backward(y), std::invalid_argument);
}

TEST_CASE("cross_entropy_sum value matches a direct log-softmax") {
    Param<double> x = make_param("x", 1, 3, 31);
    Tape<double> t(false);
    const auto loss = t.cross_entropy_sum(t.leaf(x), {1}, {1.0});
    const double* l = x.value.row_ptr(0);
    const double mx = std::max({l[0], l[1], l[2]});
    const double lse = std::log(std::exp(l[0] - mx) + std::exp(l[1] - mx) + std::exp(l[2] - mx)) + mx;
    CHECK(t.val(loss).a[0] == doctest::Approx(lse - l[1]).epsilon(1e-12));
}
