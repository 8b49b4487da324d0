// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include "geomark/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "geomark/errors.hpp"
#include "geomark/heatmap.hpp"
#include "geomark/landmarks.hpp"
#include "geomark/metrics.hpp"
#include "geomark/rng.hpp"
#include "geomark/synth.hpp"
#include "geomark/trainer.hpp"
#include "geomark/util.hpp"
#include "geomark/version.hpp"

namespace geomark::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Sidecar path for file-valued --out: metrics.csv -> metrics_<suffix>.
fs::path sidecar(const fs::path& out, const std::string& suffix) {
    fs::path p = out;
    p.replace_filename(out.stem().string() + "_" + suffix);
    return p;
}

void write_manifest(const fs::path& path, const std::string& subcommand,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, const ordered_json& config) {
    ordered_json manifest;
    manifest["toolkit_version"] = std::string(kToolkitVersion);
    manifest["subcommand"] = subcommand;
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs;
    manifest["config"] = config;
    write_text_file(path, manifest.dump(2) + "\n");
}

LossMode parse_loss_mode(const std::string& name) {
    const auto mode = loss_mode_from_name(name);
    if (!mode) {
        throw ParameterError("unknown loss mode '" + name + "' (raw|absolute|squared)");
    }
    return *mode;
}

// --- synth ------------------------------------------------------------

struct SynthArgs {
    int n = 347;
    std::vector<int> split = {36, 149, 162};
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    int width = 957;
    int height = 555;
    double spacing = 0.1;
    std::string out;
};

int do_synth(const SynthArgs& args, std::ostream& out) {
    if (args.split.size() != 3) {
        throw ParameterError("--split expects three counts: train,val,test");
    }
    DatasetSpec spec;
    spec.n_images = args.n;
    spec.split = {args.split[0], args.split[1], args.split[2]};
    spec.noise_sigma = args.noise_sigma;
    spec.seed = args.seed;
    spec.width = args.width;
    spec.height = args.height;
    spec.spacing_mm_per_px = args.spacing;
    spec.ranges = default_ranges_for(args.width, args.height);

    const fs::path out_dir(args.out);
    const DatasetFiles files = generate_dataset(spec, out_dir);

    ordered_json config;
    config["n"] = args.n;
    config["split"] = args.split;
    config["noise_sigma"] = args.noise_sigma;
    config["seed"] = args.seed;
    config["width"] = args.width;
    config["height"] = args.height;
    config["spacing_mm_per_px"] = args.spacing;
    config["rng"] = kRngName;
    write_manifest(out_dir / "manifest.json", "synth", {},
                   {files.train.string(), files.val.string(), files.test.string()}, config);
    out << "wrote " << files.train.string() << ", " << files.val.string() << ", "
        << files.test.string() << "\n";
    return 0;
}

// --- encode -----------------------------------------------------------

struct EncodeArgs {
    std::string annotations;
    int index = 0;
    int width = 0;   // 0 = record width
    int height = 0;  // 0 = record height
    double sigma = kDefaultSigma;
    std::string out;
};

int do_encode(const EncodeArgs& args, std::ostream& out) {
    const auto records = load_dataset(args.annotations, kAnnotationParseOptions);
    if (args.index < 0 || static_cast<size_t>(args.index) >= records.size()) {
        throw ParameterError("--index " + std::to_string(args.index) + " out of range (file has " +
                             std::to_string(records.size()) + " records)");
    }
    const AnnotationRecord& rec = records[static_cast<size_t>(args.index)];
    const int hm_w = args.width > 0 ? args.width : rec.width;
    const int hm_h = args.height > 0 ? args.height : rec.height;
    const double scale = lattice_scale(rec.width, rec.height, hm_w, hm_h);
    LandmarkSet coords = rec.landmarks;
    for (auto& p : coords.coords) {
        p = scale * p;
    }
    const HeatmapStack stack = encode_gaussian(coords, hm_w, hm_h, args.sigma);
    save_ghmp(args.out, stack);

    ordered_json config;
    config["index"] = args.index;
    config["width"] = hm_w;
    config["height"] = hm_h;
    config["sigma"] = args.sigma;
    config["lattice_scale"] = scale;
    write_manifest(sidecar(args.out, "manifest.json"), "encode", {args.annotations}, {args.out},
                   config);
    out << "wrote " << args.out << "\n";
    return 0;
}

// --- decode -----------------------------------------------------------

struct DecodeArgs {
    std::string heatmaps;
    std::string mode = "argmax";
    double temperature = kDefaultTemperature;
    std::string like;  // annotation file supplying image metadata
    int index = 0;
    std::string image_id = "decoded";
    std::string out;
};

int do_decode(const DecodeArgs& args, std::ostream& out) {
    const HeatmapStack stack = load_ghmp(args.heatmaps);
    LandmarkSet coords;
    if (args.mode == "argmax") {
        coords = decode_argmax(stack);
    } else if (args.mode == "softargmax") {
        coords = decode_soft_argmax(stack, args.temperature);
    } else {
        throw ParameterError("--mode must be argmax or softargmax");
    }

    AnnotationRecord rec;
    if (!args.like.empty()) {
        const auto like_records = load_dataset(args.like, kPredictionParseOptions);
        if (args.index < 0 || static_cast<size_t>(args.index) >= like_records.size()) {
            throw ParameterError("--index out of range for --like file");
        }
        const AnnotationRecord& like = like_records[static_cast<size_t>(args.index)];
        rec.image_id = like.image_id;
        rec.width = like.width;
        rec.height = like.height;
        rec.spacing_mm_per_px = like.spacing_mm_per_px;
        const double scale = lattice_scale(like.width, like.height, stack.width, stack.height);
        for (int k = 0; k < kNumLandmarks; ++k) {
            rec.landmarks.coords[static_cast<size_t>(k)] = {
                coords.coords[static_cast<size_t>(k)].x / scale,
                coords.coords[static_cast<size_t>(k)].y / scale};
        }
    } else {
        rec.image_id = args.image_id;
        rec.width = stack.width;
        rec.height = stack.height;
        rec.spacing_mm_per_px = 1.0;
        rec.landmarks = coords;
    }
    save_dataset(args.out, std::span<const AnnotationRecord>(&rec, 1));

    ordered_json config;
    config["mode"] = args.mode;
    config["temperature"] = args.temperature;
    config["like"] = args.like;
    config["index"] = args.index;
    std::vector<std::string> inputs = {args.heatmaps};
    if (!args.like.empty()) inputs.push_back(args.like);
    write_manifest(sidecar(args.out, "manifest.json"), "decode", inputs, {args.out}, config);
    out << "wrote " << args.out << "\n";
    return 0;
}

// --- eval -------------------------------------------------------------

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::vector<double> thresholds = {0.5, 1.0, 2.0};
    bool spacing_from_gt = true;
    std::string out;
};

int do_eval(const EvalArgs& args, std::ostream& out) {
    const auto preds = load_dataset(args.pred, kPredictionParseOptions);
    auto gts = load_dataset(args.gt, kAnnotationParseOptions);
    if (!args.spacing_from_gt) {
        // Rarely wanted; pairs spacing from the prediction file instead.
        for (auto& gt_rec : gts) {
            for (const auto& pred_rec : preds) {
                if (pred_rec.image_id == gt_rec.image_id) {
                    gt_rec.spacing_mm_per_px = pred_rec.spacing_mm_per_px;
                    break;
                }
            }
        }
    }
    const MetricsReport report = evaluate_corpus(preds, gts, args.thresholds);
    const std::string csv = metrics_csv(report);
    write_text_file(args.out, csv);
    const fs::path per_landmark = sidecar(args.out, "per_landmark.csv");
    write_text_file(per_landmark, per_landmark_csv(report));

    ordered_json config;
    config["thresholds_mm"] = args.thresholds;
    config["spacing_from_gt"] = args.spacing_from_gt;
    write_manifest(sidecar(args.out, "manifest.json"), "eval", {args.pred, args.gt},
                   {args.out, per_landmark.string()}, config);
    out << csv;
    return 0;
}

// --- train ------------------------------------------------------------

struct TrainArgs {
    std::string train_file;
    std::string val_file;
    std::string mode = "free_logits";
    double lambda = kDefaultLambda;
    double temperature = kDefaultTemperature;
    std::string loss_mode = "raw";
    double sigma = kDefaultSigma;
    int epochs = 300;
    int batch = 0;
    std::uint64_t seed = 0;
    double lr = 5e-4;
    int warmup_steps = 500;
    double warmup_start_factor = 0.001;
    std::vector<int> milestones = {170, 200};
    double gamma = 0.1;
    int width = 64;
    int height = 64;
    int feature_dim = 32;
    int lora_rank = 4;
    double lora_alpha = 4.0;
    int threads = 1;
    std::string out;
};

int do_train(const TrainArgs& args, std::ostream& out) {
    TrainConfig config;
    const auto mode = train_mode_from_name(args.mode);
    if (!mode) {
        throw ParameterError("--mode must be free_logits or lora_linear");
    }
    config.mode = *mode;
    config.lambda = args.lambda;
    config.temperature = args.temperature;
    config.loss_mode = parse_loss_mode(args.loss_mode);
    config.sigma = args.sigma;
    config.epochs = args.epochs;
    config.batch = args.batch;
    config.seed = args.seed;
    config.hm_width = args.width;
    config.hm_height = args.height;
    config.sched.base_lr = args.lr;
    config.sched.warmup_steps = args.warmup_steps;
    config.sched.warmup_start_factor = args.warmup_start_factor;
    config.sched.milestones = args.milestones;
    config.sched.gamma = args.gamma;
    config.feature_dim = args.feature_dim;
    config.lora_rank = args.lora_rank;
    config.lora_alpha = args.lora_alpha;

    const auto train_records = load_dataset(args.train_file, kAnnotationParseOptions);
    const auto val_records = load_dataset(args.val_file, kAnnotationParseOptions);
    const TrainReport report = train(train_records, val_records, config);

    const fs::path out_dir(args.out);
    write_text_file(out_dir / "train_report.csv", report.csv());
    write_text_file(out_dir / "geo_curve.csv", report.geo_curve_csv());

    ordered_json manifest_config;
    for (const auto& [key, value] : report.config_echo) {
        manifest_config[key] = value;
    }
    manifest_config["threads"] = args.threads;
    write_manifest(out_dir / "manifest.json", "train", {args.train_file, args.val_file},
                   {(out_dir / "train_report.csv").string(), (out_dir / "geo_curve.csv").string()},
                   manifest_config);

    const auto& final_row = report.final_row();
    out << "final epoch " << final_row.epoch << ": loss_total="
        << format_double(final_row.loss_total)
        << " geo_residual_val=" << format_double(final_row.geo_residual_val)
        << " mre_val_px=" << format_double(final_row.mre_val_px) << "\n";
    return 0;
}

// --- gradcheck ----------------------------------------------------------

struct GradcheckArgs {
    std::uint64_t seed = 0;
    int instances = 100;
    int width = 32;
    int height = 32;
    double lambda = kDefaultLambda;
    double temperature = kDefaultTemperature;
    std::string loss_mode = "raw";
    std::string out;
};

int do_gradcheck(const GradcheckArgs& args, std::ostream& out) {
    GradcheckConfig config;
    config.instances = args.instances;
    config.width = args.width;
    config.height = args.height;
    config.lambda = args.lambda;
    config.temperature = args.temperature;
    config.loss_mode = parse_loss_mode(args.loss_mode);
    const GradcheckReport report = gradcheck(config, args.seed);
    const std::string csv = report.csv();
    out << csv;
    if (!args.out.empty()) {
        const fs::path out_dir(args.out);
        write_text_file(out_dir / "gradcheck.csv", csv);
        ordered_json manifest_config;
        manifest_config["seed"] = args.seed;
        manifest_config["instances"] = args.instances;
        manifest_config["width"] = args.width;
        manifest_config["height"] = args.height;
        manifest_config["lambda"] = args.lambda;
        manifest_config["temperature"] = args.temperature;
        manifest_config["loss_mode"] = args.loss_mode;
        write_manifest(out_dir / "manifest.json", "gradcheck", {},
                       {(out_dir / "gradcheck.csv").string()}, manifest_config);
    }
    return report.all_ok() ? 0 : 1;
}

// --- report -----------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> runs;
    std::string out;
};

int do_report(const ReportArgs& args, std::ostream& out) {
    std::string merged;
    bool header_written = false;
    for (const auto& run : args.runs) {
        const fs::path csv_path = fs::path(run) / "train_report.csv";
        const std::string content = read_text_file(csv_path);
        const std::string run_name = fs::path(run).filename().string().empty()
                                         ? fs::path(run).parent_path().filename().string()
                                         : fs::path(run).filename().string();
        std::istringstream lines(content);
        std::string line;
        bool past_header = false;
        while (std::getline(lines, line)) {
            if (line.empty() || line.front() == '#') continue;
            if (!past_header) {
                past_header = true;
                if (!header_written) {
                    merged += "run," + line + "\n";
                    header_written = true;
                }
                continue;
            }
            merged += run_name + "," + line + "\n";
        }
    }
    write_text_file(args.out, merged);
    write_manifest(sidecar(args.out, "manifest.json"), "report", args.runs, {args.out},
                   ordered_json::object());
    out << "wrote " << args.out << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"geometry-constrained landmark detection toolkit"};
    app.set_version_flag("--version", std::string(kToolkitVersion));
    app.require_subcommand(0, 1);
    app.option_defaults()->always_capture_default();

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic landmark dataset");
    synth_cmd->add_option("--n", synth_args.n, "total number of images");
    synth_cmd->add_option("--split", synth_args.split, "train,val,test counts")->delimiter(',');
    synth_cmd->add_option("--noise-sigma", synth_args.noise_sigma,
                          "coordinate noise stddev in px");
    synth_cmd->add_option("--seed", synth_args.seed, "rng seed");
    synth_cmd->add_option("--width", synth_args.width, "image width in px");
    synth_cmd->add_option("--height", synth_args.height, "image height in px");
    synth_cmd->add_option("--spacing", synth_args.spacing, "mm per px recorded in the files");
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();

    EncodeArgs encode_args;
    auto* encode_cmd = app.add_subcommand("encode", "encode one record into Gaussian heatmaps");
    encode_cmd->add_option("--annotations", encode_args.annotations, "annotation file")
        ->required();
    encode_cmd->add_option("--index", encode_args.index, "record index within the file");
    encode_cmd->add_option("--width", encode_args.width, "heatmap width (0 = record width)");
    encode_cmd->add_option("--height", encode_args.height, "heatmap height (0 = record height)");
    encode_cmd->add_option("--sigma", encode_args.sigma, "Gaussian stddev in px");
    encode_cmd->add_option("--out", encode_args.out, "output .ghmp file")->required();

    DecodeArgs decode_args;
    auto* decode_cmd = app.add_subcommand("decode", "decode heatmaps into landmark coordinates");
    decode_cmd->add_option("--heatmaps", decode_args.heatmaps, "input .ghmp file")->required();
    decode_cmd->add_option("--mode", decode_args.mode, "argmax|softargmax");
    decode_cmd->add_option("--temperature", decode_args.temperature, "softargmax temperature");
    decode_cmd->add_option("--like", decode_args.like,
                           "annotation file supplying image metadata and scale");
    decode_cmd->add_option("--index", decode_args.index, "record index within --like");
    decode_cmd->add_option("--image-id", decode_args.image_id, "image id when --like is absent");
    decode_cmd->add_option("--out", decode_args.out, "output prediction json")->required();

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions against ground truth");
    eval_cmd->add_option("--pred", eval_args.pred, "prediction file")->required();
    eval_cmd->add_option("--gt", eval_args.gt, "ground-truth annotation file")->required();
    eval_cmd->add_option("--thresholds", eval_args.thresholds, "SDR thresholds in mm")
        ->delimiter(',');
    eval_cmd->add_flag("--spacing-from-gt,!--spacing-from-pred", eval_args.spacing_from_gt,
                       "take mm/px spacing from the ground-truth records");
    eval_cmd->add_option("--out", eval_args.out, "metrics csv path")->required();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "desk-scale training run");
    train_cmd->add_option("--train", train_args.train_file, "training annotation file")
        ->required();
    train_cmd->add_option("--val", train_args.val_file, "validation annotation file")->required();
    train_cmd->add_option("--mode", train_args.mode, "free_logits|lora_linear");
    train_cmd->add_option("--lambda", train_args.lambda, "geometric loss weight");
    train_cmd->add_option("--temperature", train_args.temperature, "softargmax temperature");
    train_cmd->add_option("--loss-mode", train_args.loss_mode,
                          "perpendicular term form: raw|absolute|squared");
    train_cmd->add_option("--sigma", train_args.sigma, "target Gaussian stddev in px");
    train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
    train_cmd->add_option("--batch", train_args.batch, "batch size (0 = full set)");
    train_cmd->add_option("--seed", train_args.seed, "rng seed");
    train_cmd->add_option("--lr", train_args.lr, "base learning rate");
    train_cmd->add_option("--warmup-steps", train_args.warmup_steps, "linear warmup steps");
    train_cmd->add_option("--warmup-start-factor", train_args.warmup_start_factor,
                          "initial warmup factor");
    train_cmd->add_option("--milestones", train_args.milestones, "decay epochs")->delimiter(',');
    train_cmd->add_option("--gamma", train_args.gamma, "decay factor per milestone");
    train_cmd->add_option("--width", train_args.width, "heatmap width");
    train_cmd->add_option("--height", train_args.height, "heatmap height");
    train_cmd->add_option("--feature-dim", train_args.feature_dim,
                          "lora_linear: per-image feature size");
    train_cmd->add_option("--lora-rank", train_args.lora_rank, "lora_linear: adapter rank");
    train_cmd->add_option("--lora-alpha", train_args.lora_alpha, "lora_linear: adapter alpha");
    train_cmd->add_option("--threads", train_args.threads,
                          "worker threads (execution is single-threaded and deterministic)");
    train_cmd->add_option("--out", train_args.out, "output directory")->required();

    GradcheckArgs gradcheck_args;
    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "verify analytic gradients by finite differences");
    gradcheck_cmd->add_option("--seed", gradcheck_args.seed, "rng seed");
    gradcheck_cmd->add_option("--instances", gradcheck_args.instances, "random instances");
    gradcheck_cmd->add_option("--width", gradcheck_args.width, "heatmap width");
    gradcheck_cmd->add_option("--height", gradcheck_args.height, "heatmap height");
    gradcheck_cmd->add_option("--lambda", gradcheck_args.lambda, "geometric loss weight");
    gradcheck_cmd->add_option("--temperature", gradcheck_args.temperature,
                              "softargmax temperature");
    gradcheck_cmd->add_option("--loss-mode", gradcheck_args.loss_mode, "raw|absolute|squared");
    gradcheck_cmd->add_option("--out", gradcheck_args.out, "optional output directory");

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "merge train reports into one csv");
    report_cmd->add_option("--runs", report_args.runs, "run directories")
        ->required()
        ->expected(-1);
    report_cmd->add_option("--out", report_args.out, "merged csv path")->required();

    std::vector<const char*> argv;
    argv.push_back("geomark");
    for (const auto& arg : args) {
        argv.push_back(arg.c_str());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForHelp&) {
        const auto parsed = app.get_subcommands();
        out << (parsed.empty() ? app.help() : parsed.front()->help());
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolkitVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*synth_cmd) return do_synth(synth_args, out);
        if (*encode_cmd) return do_encode(encode_args, out);
        if (*decode_cmd) return do_decode(decode_args, out);
        if (*eval_cmd) return do_eval(eval_args, out);
        if (*train_cmd) return do_train(train_args, out);
        if (*gradcheck_cmd) return do_gradcheck(gradcheck_args, out);
        if (*report_cmd) return do_report(report_args, out);
        out << app.help();
        return 0;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace geomark::cli
