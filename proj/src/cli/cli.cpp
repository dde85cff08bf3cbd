#include "cresmd/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cresmd/checkpoint.hpp"
#include "cresmd/dataset.hpp"
#include "cresmd/error.hpp"
#include "cresmd/eval.hpp"
#include "cresmd/gradcheck.hpp"
#include "cresmd/service.hpp"
#include "cresmd/synthesis.hpp"
#include "cresmd/train.hpp"

namespace cresmd {
namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

std::optional<int> parse_jpeg(const std::string& text) {
  if (text.empty() || text == "none") return std::nullopt;
  try {
    std::size_t used = 0;
    const int q = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return q;
  } catch (const std::exception&) {
    throw UsageError("--jpeg expects an integer quality or 'none', got '" + text + "'");
  }
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + " expects comma-separated numbers, got '" + text + "'");
    }
  }
  if (values.empty()) throw UsageError(flag + " is empty");
  return values;
}

// "blur,noise[,jpeg]" with jpeg an integer or "none".
DegradationSpec parse_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) parts.push_back(item);
  if (parts.size() != 2 && parts.size() != 3) {
    throw UsageError("spec must be blur,noise[,jpeg], got '" + text + "'");
  }
  DegradationSpec spec;
  const auto numbers = parse_list(parts[0] + "," + parts[1], "spec");
  spec.blur_r = numbers[0];
  spec.noise_sigma = numbers[1];
  if (parts.size() == 3) spec.jpeg_quality = parse_jpeg(parts[2]);
  return spec;
}

DegradationSpace space_by_name(const std::string& name) {
  try {
    return DegradationSpace::named(name);
  } catch (const RangeError& e) {
    throw UsageError(e.what());
  }
}

std::string format_vector(const std::vector<double>& v) {
  std::ostringstream s;
  s << '[';
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
  s << ']';
  return s.str();
}

std::string format_psnr(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<Image> load_data(const std::string& dir) {
  auto images = load_dataset_dir(dir);
  if (images.empty()) throw IoError("no .ppm/.pgm images in " + dir);
  return images;
}

void print_log_line(std::ostream& out, const TrainLogEntry& e) {
  out << e.iteration << ',' << e.loss << ',' << e.lr << '\n';
  out.flush();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Controllable residual image restoration"};
  app.require_subcommand(1);

  // degrade
  std::string in_path, out_path, jpeg_text = "none", space_name = "paper-3d";
  double blur = 0.0, noise = 0.0;
  std::uint64_t seed = 0;
  auto* degrade_cmd = app.add_subcommand("degrade", "Blur, add noise and JPEG-compress a PPM image");
  degrade_cmd->add_option("--in", in_path, "Input PPM/PGM")->required();
  degrade_cmd->add_option("--out", out_path, "Output PPM/PGM")->required();
  degrade_cmd->add_option("--blur", blur, "Gaussian blur std-dev in pixels");
  degrade_cmd->add_option("--noise", noise, "Noise std-dev on the 0-255 scale");
  degrade_cmd->add_option("--jpeg", jpeg_text, "JPEG quality 10-100 or 'none'");
  degrade_cmd->add_option("--seed", seed, "Noise seed");
  degrade_cmd->add_option("--space", space_name, "Level ranges: paper-3d, paper-2d or desk-2d");

  // train / train-baseline
  std::string config_path, data_dir, ckpt_out, spec_text;
  int log_every = 1;
  std::optional<int> iterations_override;
  std::optional<std::uint64_t> seed_override;
  auto add_train_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Training config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--data", data_dir, "Directory of clean training images")->required();
    cmd->add_option("--out", ckpt_out, "Checkpoint to write")->required();
    cmd->add_option("--iterations", iterations_override, "Override the configured iteration count");
    cmd->add_option("--seed", seed_override, "Override the configured seed");
    cmd->add_option("--log-every", log_every, "Print every n-th iteration")->check(CLI::PositiveNumber);
  };
  auto* train_cmd = app.add_subcommand("train", "Jointly train the base and condition networks");
  add_train_options(train_cmd);
  auto* baseline_cmd = app.add_subcommand("train-baseline", "Train the base network on one degradation");
  add_train_options(baseline_cmd);
  baseline_cmd->add_option("--spec", spec_text, "Degradation as blur,noise[,jpeg]")->required();

  // restore
  std::string ckpt_path, z_text;
  auto* restore_cmd = app.add_subcommand("restore", "Restore an image at a chosen condition vector");
  restore_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  restore_cmd->add_option("--in", in_path, "Input PPM/PGM")->required();
  restore_cmd->add_option("--out", out_path, "Output PPM/PGM")->required();
  restore_cmd->add_option("--z", z_text, "Condition vector, e.g. 0.5,0.6")->required();

  // eval
  std::vector<std::string> spec_texts, baseline_texts;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR of a model over a list of degradations");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  eval_cmd->add_option("--data", data_dir, "Directory of clean evaluation images")->required();
  eval_cmd->add_option("--out", out_path, "CSV report")->required();
  eval_cmd->add_option("--spec", spec_texts, "Degradation blur,noise[,jpeg]; repeatable")->required();
  eval_cmd->add_option("--baseline", baseline_texts, "spec=checkpoint of an upper-bound model; repeatable");

  // sweep
  std::string dim_text, clean_path, out_dir;
  int steps = 11;
  auto* sweep_cmd = app.add_subcommand("sweep", "Restore along one condition axis");
  sweep_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  sweep_cmd->add_option("--in", in_path, "Degraded input PPM/PGM")->required();
  sweep_cmd->add_option("--dim", dim_text, "Axis name or index")->required();
  sweep_cmd->add_option("--steps", steps, "Number of points over [0,1]")->check(CLI::Range(2, 10000));
  sweep_cmd->add_option("--z", z_text, "Values of the other axes (default all 0)");
  sweep_cmd->add_option("--clean", clean_path, "Clean reference for the PSNR column");
  sweep_cmd->add_option("--out-dir", out_dir, "Directory for frames and sweep.csv")->required();

  // gradcheck
  std::uint64_t gradcheck_seed = 1;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every op and a toy model");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "Seed for the random inputs");

  // serve
  std::string host = "127.0.0.1";
  int port = 8080, max_dimension = 1024;
  bool no_cors = false;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP restoration API");
  serve_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  serve_cmd->add_option("--port", port, "Port, 0 picks a free one")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "Address to bind");
  serve_cmd->add_option("--max-dim", max_dimension, "Largest accepted image side")->check(CLI::PositiveNumber);
  serve_cmd->add_flag("--no-cors", no_cors, "Do not send CORS headers");

  // make-dataset
  int count = 8, size = 128;
  auto* dataset_cmd = app.add_subcommand("make-dataset", "Write procedural texture images");
  dataset_cmd->add_option("--out", out_dir, "Directory to create")->required();
  dataset_cmd->add_option("--count", count, "Number of images")->check(CLI::PositiveNumber);
  dataset_cmd->add_option("--size", size, "Side length in pixels")->check(CLI::Range(8, 4096));
  dataset_cmd->add_option("--seed", seed, "Texture seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*degrade_cmd) {
      const DegradationSpace space = space_by_name(space_name);
      DegradationSpec spec{blur, noise, parse_jpeg(jpeg_text)};
      space.validate(spec);
      const Image input = load_ppm(in_path);
      Rng rng(seed);
      save_ppm(degrade(input, spec, rng), out_path);
      out << "condition " << format_vector(space.encode(spec)) << '\n';
      return kExitOk;
    }

    if (*train_cmd || *baseline_cmd) {
      TrainConfig config = load_train_config(config_path);
      if (iterations_override) config.iterations = *iterations_override;
      if (seed_override) config.seed = *seed_override;
      config.checkpoint_path = ckpt_out;
      const auto data = load_data(data_dir);
      out << "iter,loss,lr\n";
      const auto on_iteration = [&](const TrainLogEntry& e) {
        if (e.iteration % log_every == 0 || e.iteration + 1 == config.iterations) print_log_line(out, e);
      };
      if (*train_cmd) {
        train(config, data, on_iteration);
      } else {
        train_baseline(config, data, parse_spec(spec_text), on_iteration);
      }
      return kExitOk;
    }

    if (*restore_cmd) {
      const auto model = load_checkpoint(ckpt_path);
      const auto z = parse_list(z_text, "--z");
      if (z.size() != static_cast<std::size_t>(model.arch().condition_dim)) {
        throw UsageError("--z needs " + std::to_string(model.arch().condition_dim) + " values, got " +
                         std::to_string(z.size()));
      }
      if (!condition_in_unit_box(z)) {
        err << "warning: condition " << format_vector(z) << " lies outside [0,1]; over-modulating\n";
      }
      save_ppm(restore_image(model, load_ppm(in_path), z), out_path);
      return kExitOk;
    }

    if (*eval_cmd) {
      const auto model = load_checkpoint(ckpt_path);
      const auto data = load_data(data_dir);
      std::vector<DegradationSpec> specs;
      for (const auto& t : spec_texts) specs.push_back(parse_spec(t));
      std::vector<Baseline> baselines;
      for (const auto& t : baseline_texts) {
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw UsageError("--baseline expects spec=checkpoint, got '" + t + "'");
        baselines.push_back({parse_spec(t.substr(0, eq)), load_checkpoint(t.substr(eq + 1), model.arch())});
      }
      const auto report = evaluate(model, data, specs, baselines);
      report.save_csv(out_path);
      for (const auto& row : report.rows) {
        out << row.spec.describe() << ": psnr " << format_psnr(row.psnr) << " dB (degraded "
            << format_psnr(row.degraded_psnr) << " dB)";
        if (row.distance) out << ", distance " << format_psnr(*row.distance) << " dB";
        out << '\n';
      }
      return kExitOk;
    }

    if (*sweep_cmd) {
      const auto model = load_checkpoint(ckpt_path);
      const auto& space = model.space();
      std::size_t dim = space.size();
      for (std::size_t i = 0; i < space.size(); ++i) {
        if (space.dim(i).name() == dim_text || std::to_string(i) == dim_text) dim = i;
      }
      if (dim == space.size()) throw UsageError("--dim '" + dim_text + "' is not an axis of this model");
      std::vector<double> z(space.size(), 0.0);
      if (!z_text.empty()) {
        z = parse_list(z_text, "--z");
        if (z.size() != space.size()) {
          throw UsageError("--z needs " + std::to_string(space.size()) + " values, got " + std::to_string(z.size()));
        }
      }
      std::optional<Image> clean;
      if (!clean_path.empty()) clean = load_ppm(clean_path);
      const auto points = modulation_sweep(model, load_ppm(in_path), dim, steps, z, clean);
      std::filesystem::create_directories(out_dir);
      std::ostringstream csv;
      csv << "index,z,psnr\n";
      for (std::size_t k = 0; k < points.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03zu.ppm", k);
        save_ppm(points[k].restored, std::filesystem::path(out_dir) / name);
        csv << k << ',' << points[k].z[dim] << ',' << (points[k].psnr ? format_psnr(*points[k].psnr) : "") << '\n';
      }
      std::ofstream file(std::filesystem::path(out_dir) / "sweep.csv");
      if (!(file << csv.str())) throw IoError("cannot write sweep.csv in " + out_dir);
      out << csv.str();
      return kExitOk;
    }

    if (*gradcheck_cmd) {
      bool ok = true;
      for (const auto& r : run_gradcheck_suite(gradcheck_seed)) {
        char line[160];
        std::snprintf(line, sizeof line, "%-28s max rel err %.3e (tol %.0e, %zu entries, %zu retried)  %s",
                      r.name.c_str(), r.max_rel_error, r.tolerance, r.entries, r.kinks, r.passed() ? "ok" : "FAIL");
        out << line << '\n';
        ok = ok && r.passed();
      }
      return ok ? kExitOk : kExitNumeric;
    }

    if (*serve_cmd) {
      std::ifstream file(ckpt_path, std::ios::binary);
      if (!file) throw IoError("cannot open " + ckpt_path);
      const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
      RestorationService service(deserialize_checkpoint(bytes), checkpoint_hash(bytes),
                                 ServiceOptions{max_dimension, !no_cors});
      run_server(service, host, port, [&](int bound) {
        out << "listening on http://" << host << ':' << bound << '\n';
        out << "port " << bound << '\n';
        out.flush();
      });
      return kExitOk;
    }

    if (*dataset_cmd) {
      write_procedural_dataset(out_dir, count, size, seed);
      out << "wrote " << count << " images to " << out_dir << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RangeError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRange;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRange;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const GraphError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace cresmd
