#include "core/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/benchmark.hpp"
#include "core/checkpoint.hpp"
#include "core/fasta.hpp"
#include "core/metrics.hpp"
#include "core/synthetic.hpp"

namespace plm {

namespace {

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("write failed for " + path);
}

nlohmann::json train_report_json(const TrainRunReport& report) {
    nlohmann::json j;
    j["loss_trace"] = report.loss_trace;
    if (!report.aux_trace.empty()) j["kl_trace"] = report.aux_trace;
    j["final_metrics"] = report.final_metrics;
    j["wall_clock_seconds"] = report.wall_clock_seconds;
    j["seed"] = report.seed;
    j["config"] = report.config;
    return j;
}

// Manifest: command + args + resolved config + artifact fingerprints.
// Training logs carry wall-clock time, so they are listed but not hashed;
// everything under outputs must reproduce bit-identically on rerun.
struct ManifestBuilder {
    nlohmann::json j;

    ManifestBuilder(const std::string& command, const RunConfig& cfg,
                    const std::map<std::string, std::string>& args) {
        j["format"] = "plm-manifest/1";
        j["command"] = command;
        j["args"] = args;
        j["config"] = cfg.values();
        j["seed"] = cfg.seed();
        j["inputs"] = nlohmann::json::object();
        j["outputs"] = nlohmann::json::object();
        j["logs"] = nlohmann::json::array();
    }

    void input(const std::string& path) { j["inputs"][path] = file_fingerprint(path); }
    void output(const std::string& path) { j["outputs"][path] = file_fingerprint(path); }
    void log(const std::string& path) { j["logs"].push_back(path); }

    void write(const std::string& path) const { write_text(path, j.dump(2) + "\n"); }
};

std::vector<std::string> corpus_sequences(const std::string& fasta_path, int max_len) {
    const auto records = filter_by_length(read_fasta_file(fasta_path), max_len);
    if (records.empty()) {
        throw DataError("corpus " + fasta_path + ": no sequences of encodable length (max_len " +
                        std::to_string(max_len) + ")");
    }
    std::vector<std::string> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.sequence);
    return out;
}

std::string task_name_from_path(const std::string& path) {
    const auto slash = path.find_last_of("/\\");
    std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = name.find_last_of('.');
    if (dot != std::string::npos && dot > 0) name.erase(dot);
    return name.empty() ? "task" : name;
}

}  // namespace

std::string file_fingerprint(const std::string& path) {
    const std::string bytes = read_bytes(path);
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + buf;
}

std::vector<float> parse_sigma_grid(const std::string& text) {
    std::vector<float> out;
    std::istringstream is(text);
    std::string field;
    while (std::getline(is, field, ',')) {
        try {
            size_t used = 0;
            const float v = std::stof(field, &used);
            if (used != field.size() || v < 0.0f) throw std::invalid_argument(field);
            out.push_back(v);
        } catch (const std::exception&) {
            throw UsageError("sigma grid: '" + field + "' is not a non-negative number");
        }
    }
    if (out.empty()) throw UsageError("sigma grid: empty");
    return out;
}

void run_pretrain(const RunConfig& cfg, const PretrainArgs& args) {
    if (args.corpus.empty() || args.out_ckpt.empty()) {
        throw UsageError("pretrain: --corpus and --out are required");
    }
    const auto sequences = corpus_sequences(args.corpus, cfg.max_len());

    EncoderModel model = init_encoder(cfg.encoder_config());
    auto opts = cfg.pretrain_options();
    std::printf("pretrain: %zu sequences, %d steps, lr %g\n", sequences.size(), opts.steps,
                static_cast<double>(opts.optim.lr));
    TrainRunReport report = pretrain(model, sequences, opts);
    report.config = cfg.values();
    if (!report.loss_trace.empty()) {
        std::printf("pretrain: first loss %.4f, last loss %.4f\n",
                    static_cast<double>(report.loss_trace.front()),
                    static_cast<double>(report.loss_trace.back()));
    }
    for (const auto& [k, v] : report.final_metrics) std::printf("pretrain: %s = %.4f\n", k.c_str(), v);

    save_encoder_checkpoint(args.out_ckpt, model, cfg.values());
    const std::string log_path = args.out_ckpt + ".train.json";
    write_text(log_path, train_report_json(report).dump(2) + "\n");

    ManifestBuilder manifest("pretrain", cfg,
                             {{"corpus", args.corpus}, {"out", args.out_ckpt}});
    manifest.input(args.corpus);
    manifest.output(args.out_ckpt);
    manifest.log(log_path);
    manifest.write(args.out_ckpt + ".manifest.json");
}

void run_finetune(const RunConfig& cfg, const FinetuneArgs& args) {
    if (args.ckpt.empty() || args.task_csv.empty() || args.task_kind.empty() || args.out_ckpt.empty()) {
        throw UsageError("finetune: --ckpt, --task-csv, --task-kind and --out are required");
    }
    const TaskKind kind = task_kind_from_name(args.task_kind);
    const TaskSpec spec = TaskSpec::make(task_name_from_path(args.task_csv), kind,
                                         cfg.task_num_classes());
    const Dataset dataset = load_task_csv(args.task_csv, spec, mix_seed(cfg.seed(), 0x5B1));

    EncoderModel model = load_encoder_checkpoint(args.ckpt);
    TaskHead head = init_task_head(kind, model.config.hidden_dim, cfg.head_hidden_dim(),
                                   spec.num_classes, mix_seed(cfg.seed(), 0x4EAD));
    auto opts = cfg.finetune_options();
    opts.freeze_encoder = opts.freeze_encoder || args.freeze_encoder;

    std::printf("finetune: task %s (%s), %zu train examples, %d steps\n", spec.name.c_str(),
                task_kind_name(kind), dataset.splits.train.size(), opts.steps);
    TrainRunReport report = finetune(model, head, dataset, opts);
    report.config = cfg.values();
    for (const auto& [k, v] : report.final_metrics) std::printf("finetune: %s = %.4f\n", k.c_str(), v);

    save_finetuned_checkpoint(args.out_ckpt, model, head, spec, cfg.values());
    const std::string log_path = args.out_ckpt + ".train.json";
    write_text(log_path, train_report_json(report).dump(2) + "\n");

    ManifestBuilder manifest("finetune", cfg,
                             {{"ckpt", args.ckpt},
                              {"task_csv", args.task_csv},
                              {"task_kind", args.task_kind},
                              {"freeze_encoder", args.freeze_encoder ? "true" : "false"},
                              {"out", args.out_ckpt}});
    manifest.input(args.ckpt);
    manifest.input(args.task_csv);
    manifest.output(args.out_ckpt);
    manifest.log(log_path);
    manifest.write(args.out_ckpt + ".manifest.json");
}

namespace {

std::string csv_sibling(const std::string& report_path) {
    if (report_path.size() > 5 && report_path.substr(report_path.size() - 5) == ".json") {
        return report_path.substr(0, report_path.size() - 5) + ".csv";
    }
    return report_path + ".csv";
}

}  // namespace

void run_evaluate(const RunConfig& cfg, const EvaluateArgs& args) {
    if (args.ckpt.empty() || args.task_csv.empty() || args.report_path.empty()) {
        throw UsageError("evaluate: --ckpt, --task-csv and --report are required");
    }
    FinetunedModel model = load_finetuned_checkpoint(args.ckpt);
    const Dataset dataset = load_task_csv(args.task_csv, model.spec, mix_seed(cfg.seed(), 0x5B1));

    const BenchmarkReport report =
        run_benchmark(model.encoder, model.head, dataset, "test", cfg.values(), cfg.seed());
    for (const auto& m : report.metrics) {
        std::printf("evaluate: %s %s = %.6f (support %d)\n", report.task.c_str(), m.name.c_str(),
                    m.value, m.support);
    }
    write_text(args.report_path, benchmark_report_json(report));
    const std::string csv_path = csv_sibling(args.report_path);
    write_text(csv_path, benchmark_report_csv(report));

    ManifestBuilder manifest("evaluate", cfg,
                             {{"ckpt", args.ckpt},
                              {"task_csv", args.task_csv},
                              {"report", args.report_path}});
    manifest.input(args.ckpt);
    manifest.input(args.task_csv);
    manifest.output(args.report_path);
    manifest.output(csv_path);
    manifest.write(args.report_path + ".manifest.json");
}

void run_train_vae(const RunConfig& cfg, const TrainVaeArgs& args) {
    if (args.encoder_ckpt.empty() || args.corpus.empty() || args.out_ckpt.empty()) {
        throw UsageError("train-vae: --ckpt, --corpus and --out are required");
    }
    const EncoderModel encoder = load_encoder_checkpoint(args.encoder_ckpt);
    const auto sequences = corpus_sequences(args.corpus, cfg.max_len());

    DecoderModel decoder = init_decoder(cfg.decoder_config(), encoder.config.hidden_dim);
    const auto vae_cfg = cfg.vae_config();
    std::printf("train-vae: %zu sequences, %d epochs, beta %g\n", sequences.size(), vae_cfg.epochs,
                static_cast<double>(vae_cfg.kl_weight));
    TrainRunReport report = train_vae(encoder, decoder, sequences, vae_cfg);
    report.config = cfg.values();
    for (const auto& [k, v] : report.final_metrics) std::printf("train-vae: %s = %.4f\n", k.c_str(), v);

    save_decoder_checkpoint(args.out_ckpt, decoder, cfg.values());
    const std::string log_path = args.out_ckpt + ".train.json";
    write_text(log_path, train_report_json(report).dump(2) + "\n");

    ManifestBuilder manifest("train-vae", cfg,
                             {{"ckpt", args.encoder_ckpt},
                              {"corpus", args.corpus},
                              {"out", args.out_ckpt}});
    manifest.input(args.encoder_ckpt);
    manifest.input(args.corpus);
    manifest.output(args.out_ckpt);
    manifest.log(log_path);
    manifest.write(args.out_ckpt + ".manifest.json");
}

void run_generate(const RunConfig& cfg, const GenerateArgs& args) {
    if (args.encoder_ckpt.empty() || args.decoder_ckpt.empty() || args.seed_fasta.empty() ||
        args.out_prefix.empty()) {
        throw UsageError("generate: --ckpt, --decoder-ckpt, --seed-fasta and --out-prefix are required");
    }
    if (args.n_per_sigma < 1) throw UsageError("generate: --n must be >= 1");

    const EncoderModel encoder = load_encoder_checkpoint(args.encoder_ckpt);
    const DecoderModel decoder = load_decoder_checkpoint(args.decoder_ckpt);
    const auto seeds = read_fasta_file(args.seed_fasta);
    const auto sigma_grid = parse_sigma_grid(args.sigma_grid);

    const GenerationReport report = seed_generation_campaign(
        encoder, decoder, seeds, sigma_grid, args.n_per_sigma, cfg.generation_config());

    const std::string fasta_path = args.out_prefix + ".fasta";
    const std::string csv_path = args.out_prefix + ".csv";
    write_generation_fasta(report, fasta_path);
    write_generation_csv(report, csv_path);
    std::printf("generate: %zu sequences (%zu seeds x %zu sigmas x %d samples) -> %s\n",
                report.rows.size(), seeds.size(), sigma_grid.size(), args.n_per_sigma,
                fasta_path.c_str());

    ManifestBuilder manifest("generate", cfg,
                             {{"ckpt", args.encoder_ckpt},
                              {"decoder_ckpt", args.decoder_ckpt},
                              {"seed_fasta", args.seed_fasta},
                              {"sigma_grid", args.sigma_grid},
                              {"n", std::to_string(args.n_per_sigma)},
                              {"out_prefix", args.out_prefix}});
    manifest.input(args.encoder_ckpt);
    manifest.input(args.decoder_ckpt);
    manifest.input(args.seed_fasta);
    manifest.output(fasta_path);
    manifest.output(csv_path);
    manifest.write(args.out_prefix + ".manifest.json");
}

void run_make_synthetic(const RunConfig& cfg, const MakeSyntheticArgs& args) {
    if (args.kind.empty() || args.out_path.empty()) {
        throw UsageError("make-synthetic: --task-kind and --out are required");
    }
    if (args.n < 1) throw UsageError("make-synthetic: --n must be >= 1");
    write_synthetic(args.kind, args.n, cfg.synthetic_config(), args.out_path);
    std::printf("make-synthetic: wrote %d %s records to %s\n", args.n, args.kind.c_str(),
                args.out_path.c_str());

    ManifestBuilder manifest("make-synthetic", cfg,
                             {{"task_kind", args.kind},
                              {"n", std::to_string(args.n)},
                              {"out", args.out_path}});
    manifest.output(args.out_path);
    manifest.write(args.out_path + ".manifest.json");
}

void run_rerun(const std::string& manifest_path) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_bytes(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("rerun: " + manifest_path + " is not valid JSON: " + e.what());
    }
    if (!manifest.contains("format") || manifest["format"] != "plm-manifest/1") {
        throw DataError("rerun: " + manifest_path + " is not a plm manifest");
    }

    RunConfig cfg;
    std::map<std::string, std::string> expected;
    std::string command;
    std::map<std::string, std::string> args;
    try {
        cfg.load_map(manifest.at("config").get<std::map<std::string, std::string>>());
        expected = manifest.at("outputs").get<std::map<std::string, std::string>>();
        command = manifest.at("command").get<std::string>();
        args = manifest.at("args").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("rerun: malformed manifest: ") + e.what());
    }

    const auto arg = [&](const char* key) -> std::string {
        auto it = args.find(key);
        return it == args.end() ? std::string() : it->second;
    };

    if (command == "pretrain") {
        run_pretrain(cfg, {arg("corpus"), arg("out")});
    } else if (command == "finetune") {
        run_finetune(cfg, {arg("ckpt"), arg("task_csv"), arg("task_kind"),
                           arg("freeze_encoder") == "true", arg("out")});
    } else if (command == "evaluate") {
        run_evaluate(cfg, {arg("ckpt"), arg("task_csv"), arg("report")});
    } else if (command == "train-vae") {
        run_train_vae(cfg, {arg("ckpt"), arg("corpus"), arg("out")});
    } else if (command == "generate") {
        GenerateArgs g;
        g.encoder_ckpt = arg("ckpt");
        g.decoder_ckpt = arg("decoder_ckpt");
        g.seed_fasta = arg("seed_fasta");
        g.sigma_grid = arg("sigma_grid");
        g.n_per_sigma = std::stoi(arg("n"));
        g.out_prefix = arg("out_prefix");
        run_generate(cfg, g);
    } else if (command == "make-synthetic") {
        run_make_synthetic(cfg, {arg("task_kind"), std::stoi(arg("n")), arg("out")});
    } else {
        throw DataError("rerun: unknown command '" + command + "' in manifest");
    }

    for (const auto& [path, fingerprint] : expected) {
        const std::string now = file_fingerprint(path);
        if (now != fingerprint) {
            throw DataError("rerun: output " + path + " does not reproduce (" + now +
                            " != " + fingerprint + ")");
        }
        std::printf("rerun: reproduced %s (%s)\n", path.c_str(), fingerprint.c_str());
    }
}

}  // namespace plm
