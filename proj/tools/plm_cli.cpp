// Command-line front end. Talks to the toolkit exclusively through the
// C API in plm/plm.h; exit codes are the plm_status values.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plm/plm.h"

namespace {

struct SessionDeleter {
    void operator()(plm_session* s) const { plm_session_free(s); }
};
using SessionPtr = std::unique_ptr<plm_session, SessionDeleter>;

int fail(plm_session* session, plm_status status) {
    std::fprintf(stderr, "error: %s\n", plm_last_error(session));
    return static_cast<int>(status);
}

// --config FILE first, then --set key=value overrides, in order.
int apply_config(plm_session* session, const std::string& config_file,
                 const std::vector<std::string>& sets, const std::string& seed) {
    if (!config_file.empty()) {
        if (auto st = plm_config_load_file(session, config_file.c_str()); st != PLM_OK) {
            return fail(session, st);
        }
    }
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return PLM_ERR_USAGE;
        }
        if (auto st = plm_config_set(session, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
            st != PLM_OK) {
            return fail(session, st);
        }
    }
    if (!seed.empty()) {
        if (auto st = plm_config_set(session, "seed", seed.c_str()); st != PLM_OK) {
            return fail(session, st);
        }
    }
    return PLM_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plm - desk-scale protein language model toolkit"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    std::string config_file, seed;
    std::vector<std::string> sets;
    app.add_option("--config", config_file, "run configuration file (key = value lines)");
    app.add_option("--set", sets, "override a config key (key=value, repeatable)");
    app.add_option("--seed", seed, "override the run seed");

    // pretrain
    auto* pretrain = app.add_subcommand("pretrain", "masked-LM pretraining on a FASTA corpus");
    std::string pre_corpus, pre_out;
    pretrain->add_option("--corpus", pre_corpus, "FASTA corpus")->required();
    pretrain->add_option("--out", pre_out, "output encoder checkpoint")->required();

    // finetune
    auto* finetune = app.add_subcommand("finetune", "fine-tune a task head on a task CSV");
    std::string ft_ckpt, ft_csv, ft_kind, ft_out;
    bool ft_freeze = false;
    finetune->add_option("--ckpt", ft_ckpt, "encoder checkpoint")->required();
    finetune->add_option("--task-csv", ft_csv, "task CSV (sequence,label[,split])")->required();
    finetune->add_option("--task-kind", ft_kind,
                         "sequence-classification | token-classification | sequence-regression")
        ->required();
    finetune->add_flag("--freeze-encoder", ft_freeze, "train only the task head");
    finetune->add_option("--out", ft_out, "output finetuned checkpoint")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "run the benchmark metric on the test split");
    std::string ev_ckpt, ev_csv, ev_report;
    evaluate->add_option("--ckpt", ev_ckpt, "finetuned checkpoint")->required();
    evaluate->add_option("--task-csv", ev_csv, "task CSV")->required();
    evaluate->add_option("--report", ev_report, "output report JSON")->required();

    // train-vae
    auto* train_vae = app.add_subcommand("train-vae", "train the latent generator on a FASTA corpus");
    std::string tv_ckpt, tv_corpus, tv_out;
    train_vae->add_option("--ckpt", tv_ckpt, "frozen encoder checkpoint")->required();
    train_vae->add_option("--corpus", tv_corpus, "FASTA corpus")->required();
    train_vae->add_option("--out", tv_out, "output decoder checkpoint")->required();

    // generate
    auto* generate = app.add_subcommand("generate", "seed-based generation with latent noise");
    std::string ge_ckpt, ge_dec, ge_seeds, ge_sigma = "0,0.5,1,2", ge_prefix;
    int ge_n = 20;
    generate->add_option("--ckpt", ge_ckpt, "encoder checkpoint")->required();
    generate->add_option("--decoder-ckpt", ge_dec, "decoder checkpoint")->required();
    generate->add_option("--seed-fasta", ge_seeds, "FASTA of seed proteins")->required();
    generate->add_option("--sigma-grid", ge_sigma, "comma-separated noise levels");
    generate->add_option("--n", ge_n, "samples per seed per sigma");
    generate->add_option("--out-prefix", ge_prefix, "output prefix (.fasta/.csv)")->required();

    // make-synthetic
    auto* make_synth = app.add_subcommand("make-synthetic", "write a synthetic corpus or task dataset");
    std::string ms_kind, ms_out;
    int ms_n = 100;
    make_synth
        ->add_option("--task-kind", ms_kind,
                     "corpus | motif-classification | residue-window | composition-regression")
        ->required();
    make_synth->add_option("--n", ms_n, "number of records");
    make_synth->add_option("--out", ms_out, "output path")->required();

    // rerun
    auto* rerun = app.add_subcommand("rerun", "re-execute a recorded run and verify its outputs");
    std::string rr_manifest;
    rerun->add_option("--manifest", rr_manifest, "manifest JSON from a previous run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : PLM_ERR_USAGE;
    }

    SessionPtr session(plm_session_new());
    if (!session) {
        std::fprintf(stderr, "error: could not create session\n");
        return PLM_ERR_USAGE;
    }
    if (int rc = apply_config(session.get(), config_file, sets, seed); rc != PLM_OK) return rc;

    plm_status status = PLM_OK;
    if (*pretrain) {
        status = plm_run_pretrain(session.get(), pre_corpus.c_str(), pre_out.c_str());
    } else if (*finetune) {
        status = plm_run_finetune(session.get(), ft_ckpt.c_str(), ft_csv.c_str(), ft_kind.c_str(),
                                  ft_freeze ? 1 : 0, ft_out.c_str());
    } else if (*evaluate) {
        status = plm_run_evaluate(session.get(), ev_ckpt.c_str(), ev_csv.c_str(), ev_report.c_str());
    } else if (*train_vae) {
        status = plm_run_train_vae(session.get(), tv_ckpt.c_str(), tv_corpus.c_str(), tv_out.c_str());
    } else if (*generate) {
        status = plm_run_generate(session.get(), ge_ckpt.c_str(), ge_dec.c_str(), ge_seeds.c_str(),
                                  ge_sigma.c_str(), ge_n, ge_prefix.c_str());
    } else if (*make_synth) {
        status = plm_run_make_synthetic(session.get(), ms_kind.c_str(), ms_n, ms_out.c_str());
    } else if (*rerun) {
        status = plm_run_rerun(session.get(), rr_manifest.c_str());
    }

    if (status != PLM_OK) return fail(session.get(), status);
    return 0;
}
