// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fail.

#include <httplib.h>

#include <CLI11.hpp>
#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cresmd/beta.hpp"
#include "cresmd/checkpoint.hpp"
#include "cresmd/cli.hpp"
#include "cresmd/dataset.hpp"
#include "cresmd/eval.hpp"
#include "cresmd/gradcheck.hpp"
#include "cresmd/model.hpp"
#include "cresmd/rng.hpp"
#include "cresmd/service.hpp"
#include "cresmd/synthesis.hpp"
#include "cresmd/train.hpp"

namespace fs = std::filesystem;
using namespace cresmd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Suite {
  int failures = 0;

  void run(const std::string& name, const std::function<void(Outcome&)>& body) {
    Outcome o;
    try {
      body(o);
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    if (!o.passed) ++failures;
    std::cout << (o.passed ? "PASS " : "FAIL ") << name << ":" << o.detail.str() << std::endl;
  }
};

std::string fmt(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cresmd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Image random_image(int channels, int height, int width, Rng& rng) {
  Image img = Image::zeros(channels, height, width);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

// ---------------------------------------------------------------------------

void gradient_suite(Outcome& o) {
  const auto start = Clock::now();
  double worst_op = 0.0, model_err = 0.0;
  bool all = true;
  for (const auto& r : run_gradcheck_suite(1)) {
    all = all && r.passed();
    if (r.tolerance == kModelTolerance) {
      model_err = std::max(model_err, r.max_rel_error);
    } else {
      worst_op = std::max(worst_op, r.max_rel_error);
    }
  }
  const int code = cli({"gradcheck"});
  const double elapsed = seconds_since(start);
  o.detail << " worst op rel " << fmt(worst_op, 3) << " (< 1e-4), model rel " << fmt(model_err, 3)
           << " (< 1e-3), cli exit " << code << ", " << fmt(elapsed, 3) << " s for suite + cli";
  o.require(all, "tolerances");
  o.require(worst_op < kOpTolerance && model_err < kModelTolerance, "max rel error");
  o.require(code == 0, "gradcheck exit code");
  o.require(elapsed < 60.0, "60 s budget");
}

void identity_at_zero(Outcome& o, const fs::path& work) {
  Rng rng(77);
  int exact = 0;
  for (int i = 0; i < 100; ++i) {
    CResMDModel<float> model(ArchConfig::desk(), DegradationSpace::desk_2d(), ModelKind::kConditional,
                             rng.next_u64());
    for (auto& p : model.parameters()) {
      for (auto& v : p.data()) v = static_cast<float>(rng.uniform() - 0.5);
    }
    const int h = 8 + 2 * static_cast<int>(rng.uniform_int(13));
    const int w = 8 + 2 * static_cast<int>(rng.uniform_int(13));
    const Image img = random_image(3, h, w, rng);
    const auto x = image_to_tensor<float>(img);
    Tape<float> tape(Tape<float>::Mode::kInference);
    const auto y = model_forward(tape, model, x, Tensor<float>::zeros({2}));
    if (std::memcmp(y.data().data(), x.data().data(), x.numel() * sizeof(float)) == 0) ++exact;
  }

  const CResMDModel<float> model(ArchConfig::desk(), DegradationSpace::desk_2d(), ModelKind::kConditional, 5);
  save_checkpoint(model, work / "identity.ckpt");
  save_ppm(quantize_image(procedural_texture(37, 8)), work / "identity_in.ppm");
  const int code = cli({"restore", "--ckpt", (work / "identity.ckpt").string(), "--in",
                        (work / "identity_in.ppm").string(), "--out", (work / "identity_out.ppm").string(), "--z",
                        "0,0"});
  const bool same_file = code == 0 && read_bytes(work / "identity_in.ppm") == read_bytes(work / "identity_out.ppm");
  o.detail << " " << exact << "/100 forwards bit-exact, restore --z 0,0 output "
           << (same_file ? "byte-identical" : "differs");
  o.require(exact == 100, "bit-exact forward");
  o.require(same_file, "restore file identity");
}

void parameter_accounting(Outcome& o) {
  const std::size_t paper = condition_param_count(ArchConfig::paper());
  CResMDModel<float> paper_model(ArchConfig::paper(), DegradationSpace::paper_2d(), ModelKind::kConditional, 1);
  o.detail << " paper condition params " << paper << " (model " << param_count(paper_model).condition << ")";
  o.require(paper == 4102 && param_count(paper_model).condition == 4102, "4102");

  const std::vector<std::pair<ArchConfig, DegradationSpace>> others = {
      {{64, 32, 1, 3, 2}, DegradationSpace::paper_2d()}, {{32, 8, 8, 3, 2}, DegradationSpace::desk_2d()},
      {{8, 2, 2, 3, 2}, DegradationSpace::desk_2d()},    {{16, 4, 2, 1, 3}, DegradationSpace::paper_3d()},
      {{64, 32, 4, 3, 3}, DegradationSpace::paper_3d()}, {{12, 6, 3, 3, 2}, DegradationSpace::paper_2d()},
  };
  int agree = 0;
  for (const auto& [arch, space] : others) {
    CResMDModel<float> model(arch, space, ModelKind::kConditional, 2);
    std::size_t shapes = 0;
    for (const auto& p : model.named_parameters()) {
      if (p.name.rfind("condition.", 0) == 0) shapes += shape_numel(p.tensor.shape());
    }
    const auto formula = static_cast<std::size_t>(arch.groups * arch.channels * arch.condition_dim +
                                                  arch.image_channels * arch.condition_dim);
    if (shapes == formula && condition_param_count(arch) == formula && param_count(model).condition == formula) {
      ++agree;
    }
  }
  o.detail << ", formula matches shape sums on " << agree << "/6 configs";
  o.require(agree == 6, "formula vs shape sum");
}

void sampling(Outcome& o) {
  const auto start = Clock::now();
  Rng rng(2024);
  std::vector<double> draws(100000);
  for (auto& z : draws) z = beta_sample(rng, BetaParams{0.5, 1.0});
  std::sort(draws.begin(), draws.end());
  double d = 0.0;
  const double n = static_cast<double>(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = std::sqrt(draws[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
  }
  boost::math::quadrature::tanh_sinh<double> integrator;
  double worst = 0.0;
  for (const BetaParams p : {BetaParams{0.5, 1}, BetaParams{1, 1}, BetaParams{0.2, 1}, BetaParams{1, 2}}) {
    const double total = integrator.integrate([&](double z) { return beta_pdf(z, p); }, 0.0, 1.0);
    worst = std::max(worst, std::abs(total - 1.0));
  }
  const double elapsed = seconds_since(start);
  o.detail << " Kolmogorov distance " << fmt(d, 3) << " (< 0.01), worst |integral - 1| " << fmt(worst, 3)
           << " (<= 1e-6), " << fmt(elapsed, 3) << " s";
  o.require(d < 0.01, "Kolmogorov distance");
  o.require(worst <= 1e-6, "pdf quadrature");
  o.require(elapsed < 5.0, "5 s budget");
}

void degradations(Outcome& o) {
  const Image img = quantize_image(procedural_texture(128, 7));
  Rng rng(1);
  const bool blur_id = apply_blur(img, 0.0) == img;
  const bool noise_id = add_noise(img, 0.0, rng) == img;
  const bool jpeg_id = jpeg_roundtrip(img, std::nullopt) == img;
  const bool all_id = degrade(img, DegradationSpec{}, rng) == img;
  o.detail << " level-0 identities " << (blur_id && noise_id && jpeg_id && all_id ? "exact" : "broken");
  o.require(blur_id && noise_id && jpeg_id && all_id, "identity");

  double worst_sum = 0.0;
  for (double r = 0.1; r <= 4.0; r += 0.1) {
    const auto k = gaussian_kernel(r);
    double s = 0.0;
    for (double v : k) s += v;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  o.detail << ", worst |kernel sum - 1| " << fmt(worst_sum, 3);
  o.require(worst_sum <= 1e-12, "kernel sum");

  // Mid-gray keeps clamping out of the sample.
  const Image gray = Image::filled(3, 128, 128, 0.5f);
  double worst_se = 0.0;
  for (double sigma : {5.0, 15.0, 25.0}) {
    Rng noise_rng(static_cast<std::uint64_t>(sigma));
    const Image noisy = add_noise(gray, sigma, noise_rng);
    const double n = static_cast<double>(noisy.size());
    double mean = 0.0, ss = 0.0;
    for (float v : noisy.data) mean += v;
    mean /= n;
    for (float v : noisy.data) ss += (v - mean) * (v - mean);
    const double std_255 = std::sqrt(ss / (n - 1.0)) * 255.0;
    const double se = sigma / std::sqrt(2.0 * (n - 1.0));
    worst_se = std::max(worst_se, std::abs(std_255 - sigma) / se);
  }
  o.detail << ", noise std within " << fmt(worst_se, 3) << " SE";
  o.require(worst_se <= 3.0, "noise std");

  std::vector<double> mses;
  for (int q : {90, 70, 50, 30, 10}) mses.push_back(mse(jpeg_roundtrip(img, q), img));
  const bool monotone = std::is_sorted(mses.begin(), mses.end());
  o.detail << ", JPEG MSE q90..q10:";
  for (double m : mses) o.detail << " " << fmt(m, 3);
  o.require(monotone, "JPEG monotone");
}

struct DeskRun {
  CResMDModel<float> model;
  double seconds;
  TrainConfig config;
};

void desk_training(Outcome& o, const DeskRun& run, const std::vector<Image>& heldout) {
  o.detail << " " << run.config.iterations << " iterations in " << fmt(run.seconds, 4) << " s on "
           << std::max(1u, std::thread::hardware_concurrency()) << " core(s)";
  o.require(run.config.iterations == 10000, "1e4 iterations");
  o.require(run.config.arch == ArchConfig::desk(), "desk architecture");
  o.require(run.seconds <= 1800.0, "30 min budget");

  const DegradationSpec spec{1.0, 15.0, std::nullopt};
  const auto z = run.model.space().encode(spec);
  const int steps = 26;
  const int truth = static_cast<int>(std::lround(z[1] * (steps - 1)));
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    Rng rng(eval_seed(spec, i));
    const Image degraded = degrade(heldout[i], spec, rng);
    const double before = psnr(degraded, heldout[i]);
    const double after = psnr(restore_image(run.model, degraded, z), heldout[i]);
    const auto sweep = modulation_sweep(run.model, degraded, 1, steps, z, heldout[i]);
    int best = 0;
    for (int k = 1; k < steps; ++k) {
      if (*sweep[static_cast<std::size_t>(k)].psnr > *sweep[static_cast<std::size_t>(best)].psnr) best = k;
    }
    o.detail << "; image " << i << ": degraded " << fmt(before) << " dB, restored " << fmt(after) << " dB (+"
             << fmt(after - before, 3) << "), sweep argmax k=" << best << " vs true k=" << truth;
    o.require(after - before >= 1.0, "(a) +1 dB on image " + std::to_string(i));
    o.require(std::abs(best - truth) <= 2, "(b) sweep argmax on image " + std::to_string(i));
  }
  const std::vector<DegradationSpec> zero{DegradationSpec{}};
  const auto report = evaluate(run.model, heldout, zero);
  o.detail << "; zero spec psnr " << fmt(report.rows[0].psnr);
  o.require(std::isinf(report.rows[0].psnr) && report.rows[0].psnr > 0, "(c) zero spec +inf");
}

void determinism(Outcome& o, const DeskRun& run, const std::vector<Image>& train_set, const fs::path& work) {
  TrainConfig c = run.config;
  c.iterations = 25;
  c.log_path.clear();
  c.checkpoint_path = work / "det_a.ckpt";
  train(c, train_set);
  c.checkpoint_path = work / "det_b.ckpt";
  train(c, train_set);
  const auto a = read_bytes(work / "det_a.ckpt");
  const bool same = !a.empty() && a == read_bytes(work / "det_b.ckpt");
  o.detail << " two seeded " << c.iterations << "-iteration desk runs " << (same ? "byte-identical" : "differ");
  o.require(same, "identical checkpoints");

  save_checkpoint(run.model, work / "roundtrip.ckpt");
  const auto loaded = load_checkpoint(work / "roundtrip.ckpt", run.config.arch);
  Rng rng(3);
  int exact = 0;
  for (int i = 0; i < 5; ++i) {
    const auto x = image_to_tensor<float>(random_image(3, 32, 48, rng));
    const auto z = Tensor<float>::from({2}, {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform())});
    Tape<float> t1(Tape<float>::Mode::kInference), t2(Tape<float>::Mode::kInference);
    const auto y1 = model_forward(t1, run.model, x, z);
    const auto y2 = model_forward(t2, loaded, x, z);
    if (std::memcmp(y1.data().data(), y2.data().data(), y1.numel() * sizeof(float)) == 0) ++exact;
  }
  const bool resave = serialize_checkpoint(loaded) == serialize_checkpoint(run.model);
  o.detail << ", round-trip forwards bit-exact " << exact << "/5, re-save " << (resave ? "identical" : "differs");
  o.require(exact == 5 && resave, "round trip");
}

void service_contract(Outcome& o, const CResMDModel<float>& model) {
  const RestorationService service(model, checkpoint_hash(serialize_checkpoint(model)));
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  if (port <= 0) throw std::runtime_error("cannot bind a local port");
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  Rng rng(9);
  Image img = Image::zeros(3, 45, 61);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform_int(256)) / 255.0f;
  const auto wire = image_to_wire(img);
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(120, 0);

  const auto echo = client.Post("/api/restore", nlohmann::json{{"image", wire}, {"z", {0, 0}}}.dump(),
                                "application/json");
  const bool echoed = echo && echo->status == 200 &&
                      nlohmann::json::parse(echo->body).at("image").at("pixels") == wire.at("pixels");

  int rejected = 0;
  const std::vector<nlohmann::json> bad_z = {nlohmann::json{0.5}, nlohmann::json{0.1, 0.2, 0.3},
                                             nlohmann::json{"a", "b"}, nlohmann::json("0,0"),
                                             nlohmann::json{{"x", 1}}};
  for (const auto& z : bad_z) {
    const auto res = client.Post("/api/restore", nlohmann::json{{"image", wire}, {"z", z}}.dump(), "application/json");
    if (res && res->status == 400) ++rejected;
  }

  const std::string body = nlohmann::json{{"image", wire}, {"z", {0.4, 0.6}}}.dump();
  std::vector<std::future<std::pair<int, std::string>>> futures;
  for (int i = 0; i < 64; ++i) {
    futures.push_back(std::async(std::launch::async, [&] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(120, 0);
      const auto res = c.Post("/api/restore", body, "application/json");
      return res ? std::pair{res->status, res->body} : std::pair{-1, std::string()};
    }));
  }
  std::vector<std::pair<int, std::string>> replies;
  for (auto& f : futures) replies.push_back(f.get());
  server.stop();
  listener.join();

  int ok = 0, identical = 0;
  for (const auto& r : replies) {
    ok += r.first == 200;
    identical += r.first == 200 && r.second == replies[0].second;
  }
  o.detail << " z=0 echo " << (echoed ? "byte-exact" : "differs") << ", malformed z rejected " << rejected << "/"
           << bad_z.size() << " with 400, concurrent 200s " << ok << "/64, identical bodies " << identical << "/64";
  o.require(echoed, "echo");
  o.require(rejected == static_cast<int>(bad_z.size()), "400 on malformed z");
  o.require(ok == 64 && identical == 64, "concurrent identical bodies");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string root = ".";
  std::string work = "acceptance_work";
  std::string config_override;
  app.add_option("--root", root, "Repository root (holds configs/ and data/)");
  app.add_option("--work", work, "Directory for checkpoints and scratch files");
  app.add_option("--config", config_override, "Desk training config (default configs/desk.json)");
  CLI11_PARSE(app, argc, argv);

  const fs::path root_dir(root);
  const fs::path work_dir(work);
  fs::create_directories(work_dir);
  const fs::path config_path = config_override.empty() ? root_dir / "configs" / "desk.json" : fs::path(config_override);

  Suite suite;
  suite.run("gradient suite", gradient_suite);
  suite.run("identity at zero", [&](Outcome& o) { identity_at_zero(o, work_dir); });
  suite.run("parameter accounting", parameter_accounting);
  suite.run("sampling", sampling);
  suite.run("degradation identities and monotonicity", degradations);

  std::optional<DeskRun> desk;
  std::vector<Image> train_set, heldout;
  std::string desk_error;
  try {
    train_set = load_dataset_dir(root_dir / "data" / "train");
    heldout = load_dataset_dir(root_dir / "data" / "heldout");
    TrainConfig config = load_train_config(config_path);
    config.checkpoint_path = work_dir / "desk.ckpt";
    config.log_path = work_dir / "desk_log.csv";
    const auto start = Clock::now();
    auto result = train(config, train_set);
    desk = DeskRun{std::move(result.model), seconds_since(start), config};
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  const auto needs_desk = [&](const std::function<void(Outcome&)>& body) {
    return [&, body](Outcome& o) {
      if (!desk) {
        o.passed = false;
        o.detail << " [desk training failed: " << desk_error << "]";
        return;
      }
      body(o);
    };
  };
  suite.run("desk training", needs_desk([&](Outcome& o) { desk_training(o, *desk, heldout); }));
  suite.run("determinism and persistence", needs_desk([&](Outcome& o) { determinism(o, *desk, train_set, work_dir); }));
  suite.run("service contract", needs_desk([&](Outcome& o) { service_contract(o, desk->model); }));

  std::cout << (suite.failures == 0 ? "all criteria passed" : std::to_string(suite.failures) + " criteria failed")
            << std::endl;
  return suite.failures == 0 ? 0 : 1;
}
