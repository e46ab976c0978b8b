#include "evpulse/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "evpulse/count_baseline.hpp"
#include "evpulse/event_io.hpp"
#include "evpulse/frame_gen.hpp"
#include "evpulse/label_pipeline.hpp"
#include "evpulse/pulse_post.hpp"
#include "evpulse/synth.hpp"
#include "evpulse/tscan/checkpoint.hpp"
#include "evpulse/tscan/train.hpp"

namespace fs = std::filesystem;

namespace evpulse::cli {

namespace {

constexpr const char* kFramesFile = "frames.evf";
constexpr const char* kLabelsFile = "labels.csv";
constexpr const char* kEcgFile = "ecg.csv";
constexpr const char* kTruthFile = "truth.txt";
constexpr const char* kModelFile = "model.ckpt";
constexpr const char* kPredFile = "pred.csv";

struct Globals {
  std::string out = ".";
  std::uint64_t seed = 1;
  bool seed_given = false;
};

void require(const fs::path& p, const std::string& what, const std::string& command) {
  if (!fs::exists(p)) throw DependencyError(what + " " + p.string(), command);
}

void require_input(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw FormatError(what + " not found: " + p.string());
}

fs::path out_dir(const Globals& g) {
  fs::path dir(g.out);
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return tscan::parse_key_values(in);
}

double truth_hr(const fs::path& dir) {
  const auto kv = read_key_values(dir / kTruthFile);
  const auto it = kv.find("hr_true");
  if (it == kv.end()) throw FormatError("no hr_true in " + (dir / kTruthFile).string());
  return std::stod(it->second);
}

std::optional<std::pair<std::uint16_t, std::uint16_t>> sensor_from_truth(const fs::path& dir) {
  const fs::path p = dir / kTruthFile;
  if (!fs::exists(p)) return std::nullopt;
  const auto kv = read_key_values(p);
  if (!kv.count("width") || !kv.count("height")) return std::nullopt;
  return std::pair{static_cast<std::uint16_t>(std::stoul(kv.at("width"))),
                   static_cast<std::uint16_t>(std::stoul(kv.at("height")))};
}

std::uint64_t resolve_period(std::optional<std::uint64_t> period, std::optional<double> fps) {
  if (period && fps) throw ParameterError("give either --L or --fps, not both");
  if (fps) {
    if (!(*fps > 0.0)) throw ParameterError("--fps must be positive");
    return static_cast<std::uint64_t>(std::floor(1e6 / *fps));
  }
  const std::uint64_t p = period.value_or(frames::kPeriod30Fps);
  if (p == 0) throw ParameterError("--L must be positive");
  return p;
}

std::vector<std::uint64_t> frame_timestamps(const frames::FrameSet& set) {
  std::vector<std::uint64_t> ts;
  ts.reserve(set.frames.size());
  for (const auto& f : set.frames) ts.push_back(f.timestamp);
  return ts;
}

double rate_from_timestamps(std::span<const std::uint64_t> ts) {
  if (ts.size() < 2) throw LengthError("need at least two frames to infer the frame rate");
  std::vector<std::uint64_t> d(ts.size() - 1);
  for (std::size_t i = 1; i < ts.size(); ++i) d[i - 1] = ts[i] - ts[i - 1];
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  if (d[d.size() / 2] == 0) throw DomainError("frame timestamps do not advance");
  return 1e6 / static_cast<double>(d[d.size() / 2]);
}

struct Predictions {
  std::vector<std::uint64_t> timestamps;
  std::vector<double> values;
};

void write_predictions(const fs::path& path, const Predictions& p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "frame_index,timestamp,pred\n" << std::setprecision(9);
  for (std::size_t i = 0; i < p.values.size(); ++i) out << i << ',' << p.timestamps[i] << ',' << p.values[i] << '\n';
}

Predictions read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("frame_index,timestamp,pred", 0) != 0) throw ParseError(1, "unexpected prediction header");
  Predictions p;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string idx, t, v;
    std::getline(ss, idx, ',');
    std::getline(ss, t, ',');
    std::getline(ss, v, ',');
    try {
      p.timestamps.push_back(std::stoull(t));
      p.values.push_back(std::stod(v));
    } catch (const std::logic_error&) {
      throw ParseError(n, "malformed prediction row");
    }
  }
  return p;
}

// synth ---------------------------------------------------------------------

struct SynthArgs {
  double hr_bpm = 72.0;
  synth::SynthConfig config;
  std::string format = "binary";
};

void cmd_synth(const Globals& g, SynthArgs a, std::ostream& out) {
  a.config.hr_hz = a.hr_bpm / 60.0;
  a.config.seed = g.seed;
  synth::validate(a.config);
  const auto truth = synth::generate(a.config);
  const fs::path dir = out_dir(g);
  const fs::path events = dir / (a.format == "text" ? "events.csv" : "events.bin");
  io::write_stream_file(events, truth.stream);
  labels::write_ecg_csv(dir / kEcgFile, truth.ecg);
  std::ofstream m(dir / kTruthFile);
  const auto& c = truth.config;
  m << std::setprecision(17);
  m << "hr_true = " << truth.hr_true_bpm << '\n'
    << "hr_hz = " << c.hr_hz << '\n'
    << "duration = " << c.duration_s << '\n'
    << "width = " << c.width << '\n'
    << "height = " << c.height << '\n'
    << "pulse_amplitude = " << c.pulse_amplitude << '\n'
    << "contrast_threshold = " << c.contrast_threshold << '\n'
    << "noise_rate = " << c.noise_rate << '\n'
    << "skin = " << c.skin.x << ',' << c.skin.y << ',' << c.skin.width << ',' << c.skin.height << '\n'
    << "seed = " << c.seed << '\n'
    << "events = " << events.filename().string() << '\n';
  if (!m) throw Error("cannot write truth manifest");
  out << "wrote " << truth.stream.size() << " events to " << events.string() << '\n';
}

// framegen ------------------------------------------------------------------

struct FramegenArgs {
  std::string events;
  std::optional<std::uint64_t> period;
  std::optional<double> fps;
  std::vector<unsigned> crop;
  unsigned downsample = 1;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::string output;
};

void cmd_framegen(const Globals& g, const FramegenArgs& a, std::ostream& out) {
  const fs::path dir = out_dir(g);
  fs::path events = a.events;
  if (events.empty()) events = fs::exists(dir / "events.bin") ? dir / "events.bin" : dir / "events.csv";
  require_input(events, "event file");

  frames::FrameParams params;
  params.period_us = resolve_period(a.period, a.fps);
  params.downsample = a.downsample;
  if (!a.crop.empty()) {
    if (a.crop.size() != 3) throw ParameterError("--crop takes x,y,side");
    params.crop = io::CropBox{static_cast<std::uint16_t>(a.crop[0]), static_cast<std::uint16_t>(a.crop[1]),
                              static_cast<std::uint16_t>(a.crop[2])};
  }

  const io::EventFormat format = io::format_for_path(events);
  std::uint16_t w = a.width, h = a.height;
  if (format == io::EventFormat::kText && (w == 0 || h == 0)) {
    const auto sensor = sensor_from_truth(events.parent_path());
    if (!sensor) throw ParameterError("text event files need --width and --height");
    w = sensor->first;
    h = sensor->second;
  }
  std::ifstream in(events, std::ios::binary);
  if (!in) throw FormatError("cannot open " + events.string());
  io::EventReader reader(in, format, w, h);

  const fs::path target = a.output.empty() ? dir / kFramesFile : fs::path(a.output);
  std::optional<frames::FrameFileWriter> writer;
  frames::StreamingFrameGenerator gen(reader.width(), reader.height(), params, [&](const frames::AccumFrame& f) {
    writer->append(frames::normalize_quantize(f));
  });
  writer.emplace(target, gen.frame_width(), gen.frame_height());
  while (auto e = reader.next()) gen.push(io::map_polarity(*e));
  gen.finish();
  writer->close();
  out << "wrote " << writer->count() << " frames (" << gen.frame_width() << "x" << gen.frame_height() << ", L="
      << params.period_us << " us) to " << target.string() << '\n';
}

// labels --------------------------------------------------------------------

struct LabelsArgs {
  std::string frames;
  std::string ecg;
  std::optional<double> ecg_fs;
};

void cmd_labels(const Globals& g, const LabelsArgs& a, std::ostream& out) {
  const fs::path dir = out_dir(g);
  const fs::path frames_path = a.frames.empty() ? dir / kFramesFile : fs::path(a.frames);
  const fs::path ecg_path = a.ecg.empty() ? dir / kEcgFile : fs::path(a.ecg);
  require(frames_path, "frame file", "framegen");
  require_input(ecg_path, "ECG file");
  const auto set = frames::read_frames_file(frames_path);
  const auto ecg = labels::read_ecg_csv(ecg_path, a.ecg_fs);
  const auto ts = frame_timestamps(set);
  const auto series = labels::process_ecg(ecg, ts);
  labels::write_labels_csv(dir / kLabelsFile, series, 1);
  out << "wrote " << series.size() << " labels to " << (dir / kLabelsFile).string() << '\n';
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> subjects;
  std::vector<std::string> val_subjects;
  std::string manifest;
  tscan::TscanConfig config;
  std::vector<std::size_t> channels;
  std::vector<double> dropout;
  CLI::App* app = nullptr;
};

tscan::Dataset load_subject(const fs::path& dir, std::size_t chunk_len) {
  require(dir / kFramesFile, "frame file", "framegen");
  require(dir / kLabelsFile, "label file", "labels");
  const auto set = frames::read_frames_file(dir / kFramesFile);
  std::size_t first = 1;
  const auto series = labels::read_labels_csv(dir / kLabelsFile, &first);
  return tscan::make_chunks(set, series, chunk_len, first);
}

void cmd_train(const Globals& g, TrainArgs& a, std::ostream& out) {
  tscan::TscanConfig cfg;
  if (!a.manifest.empty()) {
    require_input(a.manifest, "manifest");
    cfg = tscan::read_manifest(a.manifest);
  }
  auto set = [&](const char* name) { return a.app->get_option(name)->count() > 0; };
  if (set("--frame-depth")) cfg.frame_depth = a.config.frame_depth;
  if (set("--input-size")) cfg.input_size = a.config.input_size;
  if (set("--lr")) cfg.learning_rate = a.config.learning_rate;
  if (set("--weight-decay")) cfg.weight_decay = a.config.weight_decay;
  if (set("--batch-size")) cfg.batch_size = a.config.batch_size;
  if (set("--chunk-len")) cfg.chunk_len = a.config.chunk_len;
  if (set("--epochs")) cfg.epochs = a.config.epochs;
  if (set("--flip-prob")) cfg.flip_prob = a.config.flip_prob;
  if (set("--threads")) cfg.threads = a.config.threads;
  if (set("--dense-hidden")) cfg.dense_hidden = a.config.dense_hidden;
  if (set("--channels")) std::copy(a.channels.begin(), a.channels.end(), cfg.channels.begin());
  if (set("--dropout")) std::copy(a.dropout.begin(), a.dropout.end(), cfg.dropout.begin());
  if (a.manifest.empty() || g.seed_given) cfg.seed = g.seed;
  cfg.validate();

  tscan::Dataset training, validation;
  for (const auto& s : a.subjects) {
    auto chunks = load_subject(s, cfg.chunk_len);
    if (chunks.empty()) throw LengthError("subject " + s + " is shorter than one chunk");
    if (a.val_subjects.empty() && chunks.size() > 1) {
      validation.push_back(std::move(chunks.back()));
      chunks.pop_back();
    }
    for (auto& c : chunks) training.push_back(std::move(c));
  }
  for (const auto& s : a.val_subjects) {
    for (auto& c : load_subject(s, cfg.chunk_len)) validation.push_back(std::move(c));
  }
  if (!training.empty() && training.front().frames.h != cfg.input_size) {
    throw ShapeError("frames are " + std::to_string(training.front().frames.h) + " pixels but input_size is " +
                     std::to_string(cfg.input_size));
  }

  tscan::TscanModel<float> model(cfg);
  model.initialize(cfg.seed);
  const auto result = tscan::train(model, training, validation, cfg);

  const fs::path dir = out_dir(g);
  tscan::save_checkpoint_file(dir / kModelFile, result.best);
  tscan::write_manifest(dir / "manifest.txt", cfg);
  std::ofstream h(dir / "history.csv");
  h << "epoch,train_loss,val_loss,lr\n" << std::setprecision(17);
  for (const auto& r : result.history) {
    h << r.epoch << ',' << r.train_loss << ',';
    if (std::isnan(r.val_loss)) {
      h << "NA";
    } else {
      h << r.val_loss;
    }
    h << ',' << r.last_lr << '\n';
  }
  if (!h) throw Error("cannot write history");
  out << "trained on " << training.size() << " chunks, best epoch " << result.best_epoch << "; wrote "
      << (dir / kModelFile).string() << '\n';
}

// infer ---------------------------------------------------------------------

struct InferArgs {
  std::string model;
  std::string frames;
};

void cmd_infer(const Globals& g, const InferArgs& a, std::ostream& out) {
  const fs::path dir = out_dir(g);
  const fs::path model_path = a.model.empty() ? dir / kModelFile : fs::path(a.model);
  const fs::path frames_path = a.frames.empty() ? dir / kFramesFile : fs::path(a.frames);
  require(model_path, "checkpoint", "train");
  require(frames_path, "frame file", "framegen");
  const auto model = tscan::load_checkpoint_file(model_path);
  const auto set = frames::read_frames_file(frames_path);
  if (set.width != model.config().input_size || set.height != model.config().input_size) {
    throw ShapeError("frames are " + std::to_string(set.width) + "x" + std::to_string(set.height) +
                     " but the model expects " + std::to_string(model.config().input_size));
  }
  Predictions p;
  p.timestamps = frame_timestamps(set);
  p.values = tscan::infer(model, tscan::standardize_frames(set));
  write_predictions(dir / kPredFile, p);
  out << "wrote " << p.values.size() << " predictions to " << (dir / kPredFile).string() << '\n';
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> subjects;
  std::vector<std::string> methods{"tscan=pred.csv"};
  std::optional<double> segment;
  std::string svg;
};

std::vector<double> hr_from_predictions(const Predictions& p, std::optional<double> segment) {
  const double rate = rate_from_timestamps(p.timestamps);
  const auto trace = post::postprocess(p.values, rate);
  std::vector<double> out;
  if (segment) {
    for (const auto& e : post::estimate_hr_segments(trace, rate, *segment)) out.push_back(e.bpm);
  } else {
    out.push_back(post::estimate_hr_fft(trace, rate).bpm);
  }
  return out;
}

void cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  if (a.subjects.empty()) throw ParameterError("eval needs at least one --subjects entry");
  const fs::path dir = out_dir(g);
  std::vector<std::pair<std::string, std::string>> methods;
  for (const auto& m : a.methods) {
    const auto eq = m.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == m.size()) {
      throw ParameterError("--methods entries look like name=file.csv");
    }
    methods.emplace_back(m.substr(0, eq), m.substr(eq + 1));
  }

  std::map<std::string, std::vector<double>> subject_rmse;
  for (const auto& [name, file] : methods) {
    std::vector<post::HrReport> reports;
    for (const auto& s : a.subjects) {
      const fs::path sdir(s);
      require(sdir / file, "prediction file", "infer");
      require_input(sdir / kTruthFile, "truth manifest");
      const double hr_true = truth_hr(sdir);
      const auto hrs = hr_from_predictions(read_predictions(sdir / file), a.segment);
      const std::string id = sdir.filename().string();
      double se = 0.0;
      for (std::size_t k = 0; k < hrs.size(); ++k) {
        reports.push_back(post::make_report(hrs.size() > 1 ? id + ":" + std::to_string(k) : id, hr_true, hrs[k]));
        se += reports.back().d_hr * reports.back().d_hr;
      }
      subject_rmse[id].push_back(std::sqrt(se / static_cast<double>(hrs.size())));
    }
    const std::string suffix = methods.size() > 1 ? "_" + name : "";
    post::write_reports_csv(dir / ("report" + suffix + ".csv"), reports);
    const auto summary = post::summarize(reports);
    post::write_metrics_csv(dir / ("metrics" + suffix + ".csv"), summary);
    out << name << ": MAE " << summary.mae << " RMSE " << summary.rmse << " MAPE " << summary.mape << " Pearson "
        << (summary.pearson ? std::to_string(*summary.pearson) : std::string("NA")) << '\n';
  }

  std::ofstream t(dir / "subjects.csv");
  t << "subject";
  for (const auto& m : methods) t << ',' << m.first;
  t << '\n' << std::setprecision(10);
  for (const auto& s : a.subjects) {
    const std::string id = fs::path(s).filename().string();
    t << id;
    for (double v : subject_rmse[id]) t << ',' << v;
    t << '\n';
  }

  if (!a.svg.empty()) {
    const fs::path sdir(a.subjects.front());
    const auto p = read_predictions(sdir / methods.front().second);
    const double rate = rate_from_timestamps(p.timestamps);
    std::vector<double> reference;
    if (fs::exists(sdir / kLabelsFile)) reference = post::postprocess(labels::read_labels_csv(sdir / kLabelsFile).values, rate);
    post::write_waveform_svg(a.svg, post::postprocess(p.values, rate), reference, rate, 0.0, 10.0);
  }
}

// baseline ------------------------------------------------------------------

struct BaselineArgs {
  std::string events;
  std::vector<double> bins{30.0, 60.0, 120.0};
  std::optional<double> hr_true;
  std::string subject;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
};

void cmd_baseline(const Globals& g, const BaselineArgs& a, std::ostream& out) {
  const fs::path dir = out_dir(g);
  fs::path events = a.events;
  if (events.empty()) events = fs::exists(dir / "events.bin") ? dir / "events.bin" : dir / "events.csv";
  require(events, "event file", "synth");
  std::uint16_t w = a.width, h = a.height;
  if (io::format_for_path(events) == io::EventFormat::kText && (w == 0 || h == 0)) {
    const auto sensor = sensor_from_truth(events.parent_path());
    if (!sensor) throw ParameterError("text event files need --width and --height");
    std::tie(w, h) = *sensor;
  }
  const auto stream = io::read_stream_file(events, w, h);
  double hr_true = 0.0;
  if (a.hr_true) {
    hr_true = *a.hr_true;
  } else if (fs::exists(events.parent_path() / kTruthFile)) {
    hr_true = truth_hr(events.parent_path());
  } else {
    throw ParameterError("no truth manifest next to the events; pass --hr-true");
  }
  const std::string id = a.subject.empty() ? fs::absolute(events).parent_path().filename().string() : a.subject;

  std::ofstream csv(dir / "baseline.csv");
  csv << "subject_id,hr_true,hr_pred,d_hr,bins_per_second,peak_to_median,low_confidence\n" << std::setprecision(10);
  for (double rate : a.bins) {
    if (!(rate > 0.0)) throw ParameterError("bin rates must be positive");
    const auto r = baseline::baseline_hr(baseline::event_count_signal(stream, baseline::period_for_rate(rate)));
    const auto rep = post::make_report(id, hr_true, r.estimate.bpm);
    csv << rep.subject_id << ',' << rep.hr_true << ',' << rep.hr_pred << ',' << rep.d_hr << ',' << rate << ','
        << r.estimate.peak_to_median << ',' << (r.low_confidence ? 1 : 0) << '\n';
    out << rate << " bins/s: " << rep.hr_pred << " bpm" << (r.low_confidence ? " (low confidence)" : "") << '\n';
  }
  if (!csv) throw Error("cannot write baseline.csv");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-camera pulse estimation pipeline", "evpulse"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file; command-line flags take precedence");
  Globals g;
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic subject");
  synth_cmd->add_option("--hr", sa.hr_bpm, "Heart rate in bpm (45-150)")->capture_default_str();
  synth_cmd->add_option("--duration", sa.config.duration_s, "Seconds")->capture_default_str();
  synth_cmd->add_option("--width", sa.config.width)->capture_default_str();
  synth_cmd->add_option("--height", sa.config.height)->capture_default_str();
  synth_cmd->add_option("--amplitude", sa.config.pulse_amplitude)->capture_default_str();
  synth_cmd->add_option("--threshold", sa.config.contrast_threshold, "Contrast threshold C")->capture_default_str();
  synth_cmd->add_option("--noise-rate", sa.config.noise_rate, "Background events per pixel per second")
      ->capture_default_str();
  synth_cmd->add_option("--format", sa.format)->check(CLI::IsMember({"binary", "text"}))->capture_default_str();

  FramegenArgs fa;
  auto* frame_cmd = app.add_subcommand("framegen", "Accumulate events into frames");
  frame_cmd->add_option("--events", fa.events, "Event file (default: <out>/events.bin)");
  auto* l_opt = frame_cmd->add_option("--L", fa.period, "Window length in microseconds");
  frame_cmd->add_option("--fps", fa.fps, "Frame rate; alias for --L = floor(1e6/fps)")->excludes(l_opt);
  frame_cmd->add_option("--crop", fa.crop, "x,y,side")->delimiter(',');
  frame_cmd->add_option("--df", fa.downsample, "Spatial downsampling factor")->capture_default_str();
  frame_cmd->add_option("--width", fa.width, "Sensor width for text input");
  frame_cmd->add_option("--height", fa.height, "Sensor height for text input");
  frame_cmd->add_option("--output", fa.output, "Frame container path (default: <out>/frames.evf)");

  LabelsArgs la;
  auto* labels_cmd = app.add_subcommand("labels", "Turn the ECG into per-frame labels");
  labels_cmd->add_option("--frames", la.frames);
  labels_cmd->add_option("--ecg", la.ecg);
  labels_cmd->add_option("--ecg-fs", la.ecg_fs, "Sampling rate for value-only ECG files");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train the network on subject directories");
  ta.app = train_cmd;
  train_cmd->add_option("--subjects", ta.subjects, "Subject directories")->delimiter(',')->required();
  train_cmd->add_option("--val-subjects", ta.val_subjects, "Validation subjects (default: last chunk of each)")
      ->delimiter(',');
  train_cmd->add_option("--manifest", ta.manifest, "key = value training manifest");
  train_cmd->add_option("--frame-depth", ta.config.frame_depth);
  train_cmd->add_option("--input-size", ta.config.input_size);
  train_cmd->add_option("--lr", ta.config.learning_rate);
  train_cmd->add_option("--weight-decay", ta.config.weight_decay);
  train_cmd->add_option("--batch-size", ta.config.batch_size);
  train_cmd->add_option("--chunk-len", ta.config.chunk_len);
  train_cmd->add_option("--epochs", ta.config.epochs);
  train_cmd->add_option("--flip-prob", ta.config.flip_prob);
  train_cmd->add_option("--threads", ta.config.threads);
  train_cmd->add_option("--dense-hidden", ta.config.dense_hidden);
  train_cmd->add_option("--channels", ta.channels, "Four conv widths")->delimiter(',')->expected(4);
  train_cmd->add_option("--dropout", ta.dropout, "Three dropout rates")->delimiter(',')->expected(3);

  InferArgs ia;
  auto* infer_cmd = app.add_subcommand("infer", "Predict the pulse signal for a frame file");
  infer_cmd->add_option("--model", ia.model);
  infer_cmd->add_option("--frames", ia.frames);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Heart-rate metrics over subjects");
  eval_cmd->add_option("--subjects", ea.subjects)->delimiter(',')->required();
  eval_cmd->add_option("--methods", ea.methods, "name=file pairs")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--segment", ea.segment, "Estimate HR per segment of this many seconds");
  eval_cmd->add_option("--svg", ea.svg, "Waveform plot of the first subject");

  BaselineArgs ba;
  auto* base_cmd = app.add_subcommand("baseline", "Event-count heart-rate baseline");
  base_cmd->add_option("--events", ba.events);
  base_cmd->add_option("--bins", ba.bins, "Bins per second")->delimiter(',')->capture_default_str();
  base_cmd->add_option("--hr-true", ba.hr_true, "Reference HR in bpm (default: truth manifest)");
  base_cmd->add_option("--subject", ba.subject);
  base_cmd->add_option("--width", ba.width);
  base_cmd->add_option("--height", ba.height);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  g.seed_given = seed_opt->count() > 0;
  try {
    if (*synth_cmd) cmd_synth(g, sa, out);
    if (*frame_cmd) cmd_framegen(g, fa, out);
    if (*labels_cmd) cmd_labels(g, la, out);
    if (*train_cmd) cmd_train(g, ta, out);
    if (*infer_cmd) cmd_infer(g, ia, out);
    if (*eval_cmd) cmd_eval(g, ea, out);
    if (*base_cmd) cmd_baseline(g, ba, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace evpulse::cli
