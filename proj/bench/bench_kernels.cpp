// Times the serial reference kernels against the OpenMP variants on the
// shapes the model actually runs (attention-sized GEMMs, row softmax, layer
// norm). Prints a CSV: kernel,shape,mode,reps,ms_total,ms_per_call,speedup.
// --smoke shrinks sizes and reps so the target stays fast under ctest.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "docsimp/kernels.hpp"
#include "docsimp/mat.hpp"
#include "docsimp/rng.hpp"

using docsimp::Mat;
using docsimp::Rng;

namespace {

Mat<float> random_mat(int rows, int cols, uint64_t seed) {
    Mat<float> m(rows, cols);
    Rng rng(seed);
    for (size_t i = 0; i < m.size(); ++i)
        m.a[i] = static_cast<float>(rng.normal());
    return m;
}

double time_ms(int reps, const std::function<void()>& fn) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

struct Row {
    std::string kernel;
    std::string shape;
    int reps;
    double serial_ms;
    double par_ms;
};

void print_rows(const std::vector<Row>& rows) {
    std::printf("kernel,shape,mode,reps,ms_total,ms_per_call,speedup\n");
    for (const Row& r : rows) {
        std::printf("%s,%s,serial,%d,%.3f,%.5f,1.00\n", r.kernel.c_str(), r.shape.c_str(),
                    r.reps, r.serial_ms, r.serial_ms / r.reps);
        std::printf("%s,%s,parallel,%d,%.3f,%.5f,%.2f\n", r.kernel.c_str(), r.shape.c_str(),
                    r.reps, r.par_ms, r.par_ms / r.reps,
                    r.par_ms > 0.0 ? r.serial_ms / r.par_ms : 0.0);
    }
}

}  // namespace

int main(int argc, char** argv) {
    bool smoke = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--smoke") == 0) smoke = true;

    const int n = smoke ? 96 : 512;
    const int d = smoke ? 64 : 256;
    const int reps = smoke ? 5 : 40;

    std::vector<Row> rows;
    {
        const Mat<float> A = random_mat(n, d, 1);
        const Mat<float> B = random_mat(d, n, 2);
        Mat<float> C(n, n);
        Row r{"gemm_nn",
              std::to_string(n) + "x" + std::to_string(d) + "x" + std::to_string(n), reps, 0,
              0};
        docsimp::kernels::set_mode(docsimp::kernels::Mode::serial);
        r.serial_ms = time_ms(reps, [&] { docsimp::kernels::gemm_nn(A, B, C); });
        docsimp::kernels::set_mode(docsimp::kernels::Mode::parallel);
        r.par_ms = time_ms(reps, [&] { docsimp::kernels::gemm_nn(A, B, C); });
        rows.push_back(r);
    }
    {
        const Mat<float> A = random_mat(n, d, 3);
        const Mat<float> B = random_mat(n, d, 4);
        Mat<float> C(n, n);
        Row r{"gemm_nt",
              std::to_string(n) + "x" + std::to_string(d) + "x" + std::to_string(n), reps, 0,
              0};
        docsimp::kernels::set_mode(docsimp::kernels::Mode::serial);
        r.serial_ms = time_ms(reps, [&] { docsimp::kernels::gemm_nt(A, B, C); });
        docsimp::kernels::set_mode(docsimp::kernels::Mode::parallel);
        r.par_ms = time_ms(reps, [&] { docsimp::kernels::gemm_nt(A, B, C); });
        rows.push_back(r);
    }
    {
        const Mat<float> A = random_mat(n, d, 5);
        const Mat<float> B = random_mat(n, n, 6);
        Mat<float> C(d, n);
        Row r{"gemm_tn",
              std::to_string(d) + "x" + std::to_string(n) + "x" + std::to_string(n), reps, 0,
              0};
        docsimp::kernels::set_mode(docsimp::kernels::Mode::serial);
        r.serial_ms = time_ms(reps, [&] { docsimp::kernels::gemm_tn(A, B, C); });
        docsimp::kernels::set_mode(docsimp::kernels::Mode::parallel);
        r.par_ms = time_ms(reps, [&] { docsimp::kernels::gemm_tn(A, B, C); });
        rows.push_back(r);
    }
    {
        const Mat<float> x = random_mat(n, n, 7);
        Mat<float> out(n, n);
        Row r{"softmax_rows", std::to_string(n) + "x" + std::to_string(n), reps * 4, 0, 0};
        docsimp::kernels::set_mode(docsimp::kernels::Mode::serial);
        r.serial_ms = time_ms(r.reps, [&] { docsimp::kernels::softmax_rows(x, out); });
        docsimp::kernels::set_mode(docsimp::kernels::Mode::parallel);
        r.par_ms = time_ms(r.reps, [&] { docsimp::kernels::softmax_rows(x, out); });
        rows.push_back(r);
    }
    {
        const Mat<float> x = random_mat(n, d, 8);
        const Mat<float> gamma = random_mat(1, d, 9);
        const Mat<float> beta = random_mat(1, d, 10);
        Mat<float> out(n, d);
        Row r{"layer_norm_rows", std::to_string(n) + "x" + std::to_string(d), reps * 4, 0, 0};
        docsimp::kernels::set_mode(docsimp::kernels::Mode::serial);
        r.serial_ms =
            time_ms(r.reps, [&] { docsimp::kernels::layer_norm_rows(x, gamma, beta, out, 1e-5f); });
        docsimp::kernels::set_mode(docsimp::kernels::Mode::parallel);
        r.par_ms =
            time_ms(r.reps, [&] { docsimp::kernels::layer_norm_rows(x, gamma, beta, out, 1e-5f); });
        rows.push_back(r);
    }
    docsimp::kernels::set_mode(docsimp::kernels::Mode::parallel);
    print_rows(rows);
    return 0;
}
