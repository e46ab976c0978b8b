// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; `--report FILE` also writes the lines there.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evpulse/cli.hpp"
#include "evpulse/count_baseline.hpp"
#include "evpulse/dsp.hpp"
#include "evpulse/frame_gen.hpp"
#include "evpulse/pulse_post.hpp"
#include "evpulse/synth.hpp"
#include "evpulse/tscan/layers.hpp"
#include "evpulse/tscan/model.hpp"
#include "gradcheck.hpp"

namespace fs = std::filesystem;
using namespace evpulse;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Verdict {
  bool pass = false;
  std::string detail;
};

// Five subjects: 54, 60, 72, 90 and 120 bpm, 30 s each, 64x64 sensor.
const std::vector<double> kSubjectHz{0.9, 1.0, 1.2, 1.5, 2.0};
constexpr double kSubjectSeconds = 30.0;
constexpr std::uint64_t kSubjectSeed = 11;

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

class Scratch {
 public:
  explicit Scratch(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("evpulse_acceptance_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != cli::kExitOk) {
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    throw std::runtime_error("`evpulse " + joined + "` exited " + std::to_string(code) + ": " + err.str());
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

double rms(const std::vector<double>& errors) {
  double s = 0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / static_cast<double>(errors.size()));
}

// Mean of the val_loss column of history.csv at the first and last epoch.
std::pair<double, double> val_loss_span(const fs::path& history) {
  std::ifstream in(history);
  std::string line;
  std::getline(in, line);
  std::vector<double> v;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string f;
    for (int k = 0; k < 3; ++k) std::getline(ss, f, ',');
    v.push_back(f == "NA" ? std::nan("") : std::stod(f));
  }
  return {v.front(), v.back()};
}

Verdict end_to_end() {
  Scratch root("e2e");
  std::vector<fs::path> dirs;
  for (std::size_t i = 0; i < kSubjectHz.size(); ++i) {
    const fs::path d = root.path() / ("subject" + std::to_string(i + 1));
    dirs.push_back(d);
    cli({"--out", d.string(), "--seed", std::to_string(kSubjectSeed + i), "synth", "--hr",
         fmt(kSubjectHz[i] * 60.0, 6), "--duration", fmt(kSubjectSeconds, 1)});
    cli({"--out", d.string(), "framegen", "--L", "33333"});
    cli({"--out", d.string(), "labels"});
  }
  const std::vector<std::string> net{"--input-size", "64",          "--frame-depth", "10",  "--chunk-len",
                                     "180",          "--batch-size", "8",            "--channels", "4,4,8,8",
                                     "--dense-hidden", "32",         "--lr",          "1e-3"};
  std::ostringstream detail;
  std::vector<double> trained, untrained;
  for (std::size_t h = 0; h < dirs.size(); ++h) {
    std::string train_on;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      if (i == h) continue;
      if (!train_on.empty()) train_on += ",";
      train_on += dirs[i].string();
    }
    const fs::path fold = root.path() / ("fold" + std::to_string(h + 1));
    const fs::path fold0 = root.path() / ("fold" + std::to_string(h + 1) + "_untrained");
    for (const auto& [dir, epochs] : {std::pair{fold0, std::string("0")}, std::pair{fold, std::string("30")}}) {
      std::vector<std::string> args{"--out", dir.string(), "--seed", "1", "train", "--subjects", train_on, "--epochs",
                                    epochs};
      args.insert(args.end(), net.begin(), net.end());
      const auto t0 = std::chrono::steady_clock::now();
      cli(args);
      const fs::path held = root.path() / ("eval_" + dir.filename().string());
      fs::create_directories(held);
      fs::copy_file(dirs[h] / "frames.evf", held / "frames.evf");
      fs::copy_file(dirs[h] / "truth.txt", held / "truth.txt");
      cli({"--out", held.string(), "infer", "--model", (dir / "model.ckpt").string()});
      cli({"--out", held.string(), "eval", "--subjects", held.string()});
      const auto reports = post::read_reports_csv(held / "report.csv");
      const auto& r = reports.front();
      (epochs == "0" ? untrained : trained).push_back(r.d_hr);
      if (epochs != "0") {
        const auto [v0, v1] = val_loss_span(dir / "history.csv");
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        detail << "\n      fold " << h + 1 << ": true " << fmt(r.hr_true, 2) << " pred " << fmt(r.hr_pred, 2)
               << " (untrained " << fmt(r.hr_true + untrained.back(), 2) << "), val loss " << fmt(v0) << " -> "
               << fmt(v1) << ", " << fmt(secs, 0) << " s";
      }
    }
  }
  const double rmse = rms(trained);
  std::ostringstream head;
  head << "LOSO RMSE " << fmt(rmse) << " bpm (<= 5), untrained-network RMSE " << fmt(rms(untrained));
  return {rmse <= 5.0, head.str() + detail.str()};
}

std::vector<synth::SynthTruth> subjects() {
  std::vector<synth::SynthTruth> out;
  for (std::size_t i = 0; i < kSubjectHz.size(); ++i) {
    synth::SynthConfig c;
    c.hr_hz = kSubjectHz[i];
    c.duration_s = kSubjectSeconds;
    c.seed = kSubjectSeed + i;
    out.push_back(synth::generate(c));
  }
  return out;
}

Verdict frame_rate_sweep() {
  const auto subs = subjects();
  struct Route {
    const char* name;
    synth::Route route;
  };
  bool pass = true;
  std::ostringstream d;
  for (const Route r : {Route{"count baseline", synth::Route::kCountBaseline},
                        Route{"frame mean", synth::Route::kFrameMean}}) {
    std::map<int, std::vector<double>> err;
    for (int rate : {30, 60, 120}) {
      synth::RecoveryOptions o;
      o.bins_per_second = rate;
      o.frame_period_us = baseline::period_for_rate(rate);
      for (const auto& s : subs) err[rate].push_back(synth::verify_recoverable(s, r.route, o).error_bpm);
    }
    const double e30 = rms(err[30]), e60 = rms(err[60]), e120 = rms(err[120]);
    const bool ok = e120 <= e30 + 1.0;
    pass = pass && ok;
    d << "\n      " << r.name << ": RMSE 30/60/120 FPS = " << fmt(e30) << " / " << fmt(e60) << " / " << fmt(e120)
      << (ok ? "" : "  <-- violates") << "; per subject @120:";
    for (double e : err[120]) d << " " << fmt(e, 2);
  }
  return {pass, "120 FPS error <= 30 FPS error + 1 bpm on 5 subjects" + d.str()};
}

Verdict count_recovery() {
  synth::RateModulatedConfig c;
  c.hr_hz = 1.2;
  c.depth = 0.5;
  c.seed = 4;
  const auto modulated = synth::generate_rate_modulated(c);
  c.depth = 0.0;
  c.seed = 5;
  const auto noise = synth::generate_rate_modulated(c);
  bool pass = true;
  std::ostringstream d;
  for (double rate : {30.0, 60.0, 120.0}) {
    const auto p = baseline::period_for_rate(rate);
    const auto m = baseline::baseline_hr(baseline::event_count_signal(modulated, p));
    const auto n = baseline::baseline_hr(baseline::event_count_signal(noise, p));
    const bool ok = std::abs(m.estimate.bpm - 72.0) <= 1.0 && !m.low_confidence && n.low_confidence;
    pass = pass && ok;
    d << " | " << rate << " bins/s: " << fmt(m.estimate.bpm, 2) << " bpm, noise ratio "
      << fmt(n.estimate.peak_to_median, 2) << (n.low_confidence ? " flagged" : " NOT flagged");
  }
  return {pass, "72 bpm at 50% depth" + d.str()};
}

double fitted_amplitude(const std::vector<double>& y, double f, double fs, std::size_t lo, std::size_t hi) {
  double ss = 0, sc = 0, cc = 0, ys = 0, yc = 0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double ph = 2.0 * kPi * f * static_cast<double>(i) / fs;
    const double s = std::sin(ph), c = std::cos(ph);
    ss += s * s;
    sc += s * c;
    cc += c * c;
    ys += y[i] * s;
    yc += y[i] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (ys * cc - yc * sc) / det, b = (yc * ss - ys * sc) / det;
  return std::hypot(a, b);
}

double analytic_first_order(dsp::Band band, double fs, double f) {
  const double k = 2.0 * fs;
  const double w1 = k * std::tan(kPi * band.low_hz / fs), w2 = k * std::tan(kPi * band.high_hz / fs);
  const double w = k * std::tan(kPi * f / fs);
  const double x = (w * w - w1 * w2) / ((w2 - w1) * w);
  return 1.0 / std::sqrt(1.0 + x * x);
}

Verdict filter_suite() {
  bool pass = true;
  std::ostringstream d;
  double worst_poly = 0;
  for (int deg = 0; deg <= 2; ++deg) {
    std::vector<double> x(2000);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = static_cast<double>(i) / 100.0;
      x[i] = 1.5 - 0.25 * (deg >= 1 ? t : 0.0) + (deg == 2 ? 0.03 * t * t : 0.0);
    }
    const auto y = dsp::savgol_filter(x, 101, 2);
    for (std::size_t i = 50; i + 50 < x.size(); ++i) worst_poly = std::max(worst_poly, std::abs(y[i] - x[i]));
  }
  pass = pass && worst_poly <= 1e-8;
  d << "SG(101,2) max poly error " << worst_poly;
  for (double fs : {30.0, 1000.0}) {
    const auto sos = dsp::butter_bandpass_design(1, dsp::kHeartBand, fs);
    const std::size_t n = static_cast<std::size_t>(120.0 * fs), edge = static_cast<std::size_t>(20.0 * fs);
    const auto dc = dsp::sos_filtfilt(sos, std::vector<double>(n, 1.0));
    double dc_gain = 0;
    for (std::size_t i = edge; i + edge < n; ++i) dc_gain = std::max(dc_gain, std::abs(dc[i]));
    auto tone = [&](double f) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * kPi * f * static_cast<double>(i) / fs);
      return fitted_amplitude(dsp::sos_filtfilt(sos, x), f, fs, edge, n - edge);
    };
    const double center = tone(std::sqrt(dsp::kHeartBand.low_hz * dsp::kHeartBand.high_hz));
    const double g10 = tone(10.0);
    const double h10 = analytic_first_order(dsp::kHeartBand, fs, 10.0);
    // filtfilt applies the response twice
    const double rel = std::abs(g10 - h10 * h10) / (h10 * h10);
    const bool ok = dc_gain < 1e-3 && center >= 0.9 && center <= 1.0 + 1e-6 && rel <= 0.1;
    pass = pass && ok;
    d << " | fs " << fs << ": DC " << dc_gain << ", centre " << fmt(center, 4) << ", 10 Hz " << g10 << " vs |H|^2 "
      << h10 * h10 << " (" << fmt(100 * rel, 2) << "%)";
  }
  return {pass, d.str()};
}

Verdict gradient_check() {
  using test_util::check_gradient;
  using test_util::random_values;
  const auto t0 = std::chrono::steady_clock::now();
  tscan::TscanConfig c;
  c.input_size = 16;
  c.frame_depth = 3;
  c.chunk_len = 6;
  c.channels = {3, 3, 6, 6};
  c.dense_hidden = 8;
  tscan::TscanModel<double> model(c);
  model.initialize(3);
  tscan::Tensor4<double> x(3, 1, 16, 16);
  x.data = random_values(x.size(), 4);
  const auto y = random_values(3, 5);
  auto dloss = [&](std::span<const double> p) {
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2.0 * (p[i] - y[i]) / static_cast<double>(p.size());
    return g;
  };
  auto grads = model.zero_gradients();
  tscan::Tensor4<double> dx;
  std::mt19937_64 rng(9);
  model.forward_backward(x, dloss, grads, tscan::Mode::kTrain, &rng, &dx);
  auto loss = [&] {
    std::mt19937_64 r(9);
    const auto p = model.forward(x, tscan::Mode::kTrain, &r);
    return static_cast<double>(tscan::loss_mse<double>(p, y));
  };

  // Whole-model parameters grouped by layer type, plus the input gradient.
  std::map<std::string, test_util::GradReport> by_type;
  auto merge = [&](const std::string& type, const test_util::GradReport& r) {
    auto& m = by_type[type];
    m.checked += r.checked;
    m.worst = std::max(m.worst, r.worst);
  };
  auto& params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& name = params[k].name;
    const std::string type = name.rfind("dense", 0) == 0       ? "dense"
                             : name.rfind("attention", 0) == 0 ? "attention 1x1 conv"
                             : name.rfind("motion", 0) == 0    ? "motion conv"
                                                               : "appearance conv";
    merge(type, check_gradient(params[k].value, grads[k], loss, 100, 100 + k, 1e-4));
  }
  merge("network input", check_gradient(x.data, dx.data, loss, 150, 7, 1e-4));

  // Each layer on its own, sized so every type has at least 100 coordinates.
  using T4 = tscan::Tensor4<double>;
  auto tensor = [](std::size_t n, std::size_t ch, std::size_t h, std::size_t w, std::uint64_t seed, double lo = -1.0,
                   double hi = 1.0) {
    T4 t(n, ch, h, w);
    t.data = random_values(t.size(), seed, lo, hi);
    return t;
  };
  auto weighted = [](const T4& out, const std::vector<double>& r) {
    double acc = 0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += r[i] * out.data[i];
    return acc;
  };
  auto like = [](const std::vector<double>& r, const T4& shape) {
    T4 t(shape.n, shape.c, shape.h, shape.w);
    t.data = r;
    return t;
  };
  for (const auto& [type, shape] : {std::pair{std::string("motion conv"), tscan::ConvShape{2, 3, 3, 1}},
                                    std::pair{std::string("appearance conv"), tscan::ConvShape{3, 2, 3, 0}},
                                    std::pair{std::string("attention 1x1 conv"), tscan::ConvShape{99, 1, 1, 0}}}) {
    auto in = tensor(2, shape.in_channels, 6, 5, 30);
    auto w = random_values(shape.out_channels * shape.in_channels * shape.kernel * shape.kernel, 31);
    auto b = random_values(shape.out_channels, 32);
    const auto y0 = tscan::conv2d_forward<double>(in, w, b, shape);
    const auto r = random_values(y0.size(), 33);
    auto f = [&] { return weighted(tscan::conv2d_forward<double>(in, w, b, shape), r); };
    std::vector<double> dw(w.size(), 0.0), db(b.size(), 0.0);
    T4 din;
    tscan::conv2d_backward<double>(in, like(r, y0), w, shape, dw, db, &din);
    merge(type, check_gradient(w, dw, f, 100, 34));
    merge(type, check_gradient(b, db, f, 100, 35));
    merge(type, check_gradient(in.data, din.data, f, 100, 36));
  }
  {
    auto in = tensor(4, 2, 3, 3, 40);
    auto w = random_values(5 * 18, 41);
    auto b = random_values(5, 42);
    const auto y0 = tscan::dense_forward<double>(in, w, b, 5);
    const auto r = random_values(y0.size(), 43);
    auto f = [&] { return weighted(tscan::dense_forward<double>(in, w, b, 5), r); };
    std::vector<double> dw(w.size(), 0.0), db(b.size(), 0.0);
    T4 din;
    tscan::dense_backward<double>(in, like(r, y0), w, dw, db, &din);
    merge("dense", check_gradient(w, dw, f, 100, 44));
    merge("dense", check_gradient(b, db, f, 100, 45));
    merge("dense", check_gradient(in.data, din.data, f, 100, 46));
  }
  {
    auto in = tensor(6, 6, 4, 4, 50);
    const auto r = random_values(in.size(), 51);
    merge("temporal shift", check_gradient(in.data, tscan::tsm_shift_backward(like(r, in), 3).data,
                                           [&] { return weighted(tscan::tsm_shift(in, 3), r); }, 100, 52));
    const auto p0 = tscan::avgpool2_forward(in);
    const auto rp = random_values(p0.size(), 53);
    merge("average pool", check_gradient(in.data, tscan::avgpool2_backward(like(rp, p0), in.h, in.w).data,
                                         [&] { return weighted(tscan::avgpool2_forward(in), rp); }, 100, 54));
    auto th = [&] {
      auto t = in;
      tscan::tanh_inplace(t);
      return t;
    };
    auto sg = [&] {
      auto t = in;
      tscan::sigmoid_inplace(t);
      return t;
    };
    merge("tanh", check_gradient(in.data, tscan::tanh_backward(th(), like(r, in)).data,
                                 [&] { return weighted(th(), r); }, 100, 55));
    merge("sigmoid", check_gradient(in.data, tscan::sigmoid_backward(sg(), like(r, in)).data,
                                    [&] { return weighted(sg(), r); }, 100, 56));
  }
  {
    auto m = tensor(3, 1, 6, 6, 60, 0.05, 0.95);
    auto feat = tensor(3, 2, 6, 6, 61);
    const auto ra = random_values(m.size(), 62);
    merge("attention normalize",
          check_gradient(m.data, tscan::attention_normalize_backward(m, like(ra, m)).data,
                         [&] { return weighted(tscan::attention_normalize(m), ra); }, 100, 63));
    const auto g0 = tscan::gate_forward(feat, m);
    const auto rg = random_values(g0.size(), 64);
    T4 dfeat, dmask;
    tscan::gate_backward(feat, m, like(rg, g0), dfeat, dmask);
    auto f = [&] { return weighted(tscan::gate_forward(feat, m), rg); };
    merge("gate", check_gradient(feat.data, dfeat.data, f, 100, 65));
    merge("gate", check_gradient(m.data, dmask.data, f, 100, 66));
  }

  bool pass = true;
  std::ostringstream d;
  for (const auto& [type, r] : by_type) {
    const bool ok = r.worst < 1e-4 && r.checked >= 100;
    pass = pass && ok;
    d << " | " << type << ": " << r.checked << " coords, worst " << r.worst;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  pass = pass && secs <= 120.0;
  return {pass, "reduced 16x16 model, double, " + fmt(secs, 1) + " s" + d.str()};
}

Verdict determinism() {
  std::map<std::string, std::vector<std::uint64_t>> digests;
  const std::vector<std::string> files{"s/events.bin", "s/ecg.csv",      "s/truth.txt",      "s/frames.evf",
                                       "s/labels.csv", "s/pred.csv",     "run/model.ckpt",   "run/history.csv",
                                       "run/report.csv", "run/metrics.csv", "run/subjects.csv", "run/baseline.csv"};
  for (int rep = 0; rep < 2; ++rep) {
    Scratch root("det");
    const auto s = (root.path() / "s").string(), run = (root.path() / "run").string();
    cli({"--out", s, "--seed", "21", "synth", "--hr", "75", "--duration", "20"});
    cli({"--out", s, "framegen", "--df", "4"});
    cli({"--out", s, "labels"});
    cli({"--out", run, "--seed", "3", "train", "--subjects", s, "--input-size", "16", "--chunk-len", "30",
         "--epochs", "3", "--channels", "4,4,8,8", "--dense-hidden", "16", "--lr", "1e-3", "--threads", "1"});
    cli({"--out", s, "infer", "--model", run + "/model.ckpt"});
    cli({"--out", run, "eval", "--subjects", s});
    cli({"--out", run, "baseline", "--events", s + "/events.bin"});
    for (const auto& f : files) digests[f].push_back(fnv1a(slurp(root.path() / f)));
  }
  bool pass = true;
  std::ostringstream d;
  for (const auto& f : files) {
    const auto& v = digests[f];
    pass = pass && v[0] == v[1];
    d << (f == files.front() ? "" : ", ") << f.substr(f.find('/') + 1) << " " << hex(v[0]).substr(0, 8)
      << (v[0] == v[1] ? "" : " != " + hex(v[1]).substr(0, 8));
  }
  return {pass, "two seeded runs, FNV-1a digests: " + d.str()};
}

Verdict frame_oracle() {
  const std::uint16_t W = 144, H = 144;
  std::mt19937_64 rng(77);
  frames::EventWindow w;
  w.t_end = 1'000'000;
  std::vector<std::int64_t> tally(std::size_t{W} * H, 0);
  for (std::uint64_t i = 0; i < 1'000'000; ++i) {
    const auto x = static_cast<std::uint16_t>(rng() % W), y = static_cast<std::uint16_t>(rng() % H);
    const std::int8_t p = (rng() & 1) ? 1 : -1;
    w.events.push_back({i, x, y, p});
    tally[std::size_t{y} * W + x] += p;
  }
  const auto f = frames::accumulate_frame(w, W, H);
  std::size_t mismatches = 0;
  for (std::size_t k = 0; k < tally.size(); ++k) mismatches += f.pixels[k] != tally[k];

  synth::SynthConfig sc;
  sc.duration_s = 10.0;
  sc.seed = 8;
  const auto stream = io::map_polarity(synth::generate(sc).stream);
  frames::FrameParams fp;
  std::ostringstream serial, parallel;
  frames::write_frames(serial, frames::generate_frames(stream, fp, 1));
  frames::write_frames(parallel, frames::generate_frames(stream, fp, 4));
  const bool same = serial.str() == parallel.str();
  return {mismatches == 0 && same, "1e6 events, " + std::to_string(mismatches) + " pixel mismatches; serial vs 4-thread container " +
                                      (same ? "identical" : "DIFFERENT") + " (" + std::to_string(serial.str().size()) +
                                      " bytes)"};
}

Verdict quantization() {
  bool monotone = true;
  int worst_asym = 0;
  for (int a = -20; a < 20; ++a) monotone = monotone && frames::quantize_value(a) <= frames::quantize_value(a + 1);
  for (int a = 0; a <= 20; ++a) {
    const int up = frames::quantize_value(a) - 128, down = 128 - frames::quantize_value(-a);
    worst_asym = std::max(worst_asym, std::abs(up - down));
  }
  const int lo = frames::quantize_value(-8), mid = frames::quantize_value(0), hi = frames::quantize_value(8);
  frames::AccumFrame acc{3, 1, {-100, 0, 100}, 0};
  const auto q = frames::normalize_quantize(acc);
  const bool ok = monotone && lo == 0 && mid == 128 && hi == 255 && worst_asym <= 1 && q.pixels[0] == 0 &&
                  q.pixels[1] == 128 && q.pixels[2] == 255;
  return {ok, std::string("monotone ") + (monotone ? "yes" : "NO") + ", -8/0/+8 -> " + std::to_string(lo) + "/" +
                  std::to_string(mid) + "/" + std::to_string(hi) + ", worst antisymmetry " +
                  std::to_string(worst_asym) + " code"};
}

Verdict metric_arithmetic() {
  const std::vector<post::HrReport> ex{post::make_report("a", 70, 72), post::make_report("b", 80, 78)};
  const auto m = post::compute_metrics(ex);
  const double mape = (2.0 / 70.0 + 2.0 / 80.0) / 2.0 * 100.0;
  bool ok = std::abs(m.mae - 2.0) <= 1e-9 && std::abs(m.rmse - 2.0) <= 1e-9 && std::abs(m.mape - mape) <= 1e-9;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> hr(45.0, 150.0), err(-15.0, 15.0);
  std::uniform_int_distribution<int> size(2, 40);
  std::size_t violations = 0;
  for (int s = 0; s < 1000; ++s) {
    std::vector<post::HrReport> r;
    const int n = size(rng);
    for (int i = 0; i < n; ++i) {
      const double t = hr(rng);
      r.push_back(post::make_report("s" + std::to_string(i), t, t + err(rng)));
    }
    const auto mm = post::compute_metrics(r);
    violations += mm.rmse < mm.mae;
  }
  ok = ok && violations == 0;
  return {ok, "worked example MAE " + fmt(m.mae, 12) + " RMSE " + fmt(m.rmse, 12) + " MAPE " + fmt(m.mape, 12) +
                  " (hand " + fmt(mape, 12) + "); RMSE < MAE in " + std::to_string(violations) + " of 1000 sets"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"end-to-end synthetic recovery", end_to_end},
      {"frame-rate sweep direction", frame_rate_sweep},
      {"count-baseline recovery", count_recovery},
      {"filter suite", filter_suite},
      {"gradient verification", gradient_check},
      {"deterministic reproducibility", determinism},
      {"frame-generation oracle equivalence", frame_oracle},
      {"quantization invariants", quantization},
      {"metric arithmetic", metric_arithmetic},
  };
  std::set<int> only;
  std::ofstream report;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--report" && i + 1 < argc) {
      report.open(argv[++i]);
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }
  auto emit = [&](const std::string& line) {
    std::cout << line << std::endl;
    if (report) report << line << std::endl;
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !v.pass;
    emit(std::string(v.pass ? "PASS" : "FAIL") + "  " + std::to_string(id) + ". " + criteria[i].first + " [" +
         fmt(secs, 1) + " s]: " + v.detail);
  }
  emit(failures ? "FAILED " + std::to_string(failures) + " criteria" : std::string("all criteria passed"));
  return failures ? 1 : 0;
}
