#include <benchmark/benchmark.h>

#include "mlta/errors.hpp"
#include "mlta/fit.hpp"
#include "mlta/inference.hpp"
#include "mlta/quadrature.hpp"
#include "mlta/variational.hpp"

namespace {

using namespace mlta;

// Voting-sized problem: 435 rows, 32 items, four groups.
MltaParameters truth(int dim, SlopeMode mode) {
    MltaParameters p = MltaParameters::zeros({4, dim, mode}, 32);
    p.eta << 0.4, 0.3, 0.2, 0.1;
    for (Eigen::Index m = 0; m < 32; ++m) {
        for (Eigen::Index g = 0; g < 4; ++g) p.intercept(m, g) = ((m + g) % 3 == 0 ? 2.0 : -1.0) * (g % 2 ? 1 : -1);
    }
    for (auto& w : p.slopes) w.setConstant(0.8);
    return p;
}

const BinaryData& voting_sized() {
    static const BinaryData data = simulate(truth(2, SlopeMode::Common), 435, 1).data;
    return data;
}

void BM_GaussHermiteLoglik(benchmark::State& state) {
    const int q = static_cast<int>(state.range(0));
    const int dim = static_cast<int>(state.range(1));
    const auto p = truth(dim, SlopeMode::Free);
    const auto rule = hermite_grid(q, dim);
    for (auto _ : state) benchmark::DoNotOptimize(gh_loglik(voting_sized(), p, rule));
}
BENCHMARK(BM_GaussHermiteLoglik)->Args({5, 1})->Args({5, 2})->Args({5, 3})->Args({21, 2})->Unit(benchmark::kMillisecond);

// One outer iteration: E-step, posterior and xi sweeps, M-step and bound.
void BM_Iteration(benchmark::State& state) {
    const auto mode = state.range(0) ? SlopeMode::Common : SlopeMode::Free;
    const auto& data = voting_sized();
    const Responses resp(data);
    auto params = truth(2, mode);
    auto vs = VariationalState::init(data.n_rows(), 32, 4, 2, kInitialXi);
    vs.z = estep_responsibilities(params.eta, component_log_density(data, params, hermite_grid(5, 2)));
    update_posteriors(resp, params, vs);
    update_bounds(resp, params, vs);
    for (auto _ : state) {
        vs.z = estep_responsibilities(params.eta, vs.bound);
        params.eta = vs.z.colwise().sum().transpose() / static_cast<double>(data.n_rows());
        update_xi(params, vs);
        update_posteriors(resp, params, vs);
        if (mode == SlopeMode::Common) {
            mstep_common(resp, vs, params);
        } else {
            mstep_free(resp, vs, params);
        }
        update_bounds(resp, params, vs);
        benchmark::DoNotOptimize(variational_loglik(resp, params.eta, vs.bound));
    }
}
BENCHMARK(BM_Iteration)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SingleStartFit(benchmark::State& state) {
    FitControl ctrl;
    ctrl.threads = 1;
    for (auto _ : state) {
        ctrl.seed += 1;
        try {
            benchmark::DoNotOptimize(fit_mlta(voting_sized(), {4, 2, SlopeMode::Common}, ctrl).report.loglik_gh);
        } catch (const Error&) {
        }
    }
}
BENCHMARK(BM_SingleStartFit)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
