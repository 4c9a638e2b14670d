// Serial reference vs OpenMP kernels: batch gradient and state building.

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "citylight/features.hpp"
#include "citylight/qnetwork.hpp"
#include "citylight/runner.hpp"

using namespace citylight;

namespace {

template <typename F>
double best_ms(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool agree) {
  std::printf("%-22s %10.3f %10.3f %8.2fx  %s\n", name, serial, parallel, serial / parallel, agree ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel benchmark: serial reference vs OpenMP"};
  int reps = 20;
  int batch_size = 64;
  int warmup = 600;
  app.add_option("--reps", reps, "Repetitions per kernel (best time reported)")->check(CLI::PositiveNumber);
  app.add_option("--batch", batch_size, "Training batch size")->check(CLI::PositiveNumber);
  app.add_option("--warmup", warmup, "Simulated seconds before building states")->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-22s %10s %10s %9s  %s\n", "kernel", "serial ms", "omp ms", "speedup", "agree");

  Rng rng = make_rng(1, "bench");
  const QNetwork net = QNetwork::initialized(kStateDim, {128, 128}, rng);
  std::vector<StateVector> states(batch_size);
  std::vector<TrainTarget> batch;
  for (auto& s : states) {
    for (double& v : s) v = 5.0 * uniform01(rng);
    batch.push_back({s, uniform_index(rng, kNumActions), 2.0 * uniform01(rng) - 1.0, -uniform01(rng)});
  }
  std::vector<double> g_serial(net.params().size()), g_parallel(net.params().size());
  const double t_serial = best_ms(reps, [&] { loss_and_gradient_serial(net, batch, g_serial); });
  const double t_parallel = best_ms(reps, [&] { loss_and_gradient(net, batch, g_parallel); });
  double worst = 0.0;
  for (std::size_t i = 0; i < g_serial.size(); ++i) worst = std::max(worst, std::abs(g_serial[i] - g_parallel[i]));
  row("loss_and_gradient", t_serial, t_parallel, worst < 1e-12);

  // A congested desk grid with every signal on a fixed phase.
  const Scenario scenario = desk_scenario(1);
  SimWorld world(scenario.network, scenario.flows);
  const std::size_t n = world.network().intersections().size();
  std::vector<SlotMask> masks(n, SlotMask().set(1).set(7));
  for (int t = 0; t < warmup; ++t) world.step(masks);
  std::vector<SignalView> signals(n, SignalView{PhaseId(2), 12});
  std::vector<StateVector> s_serial, s_parallel;
  const double b_serial = best_ms(reps, [&] { s_serial = build_states_serial(world, signals); });
  const double b_parallel = best_ms(reps, [&] { s_parallel = build_states(world, signals); });
  row("build_states", b_serial, b_parallel, s_serial == s_parallel);
  return 0;
}
