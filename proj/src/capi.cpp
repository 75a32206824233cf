#include "plm/plm.h"

#include <cstring>
#include <string>

#include "core/config.hpp"
#include "core/metrics.hpp"
#include "core/pipeline.hpp"
#include "core/tokenizer.hpp"

struct plm_session {
    plm::RunConfig config;
    std::string last_error;
};

namespace {

constexpr const char* kVersion = "0.1.0";

// Runs fn, mapping the core error taxonomy onto status codes and stashing
// the message on the session.
template <typename Fn>
plm_status guarded(plm_session* session, Fn&& fn) {
    if (!session) return PLM_ERR_USAGE;
    session->last_error.clear();
    try {
        fn();
        return PLM_OK;
    } catch (const plm::UsageError& e) {
        session->last_error = e.what();
        return PLM_ERR_USAGE;
    } catch (const plm::NumericError& e) {
        session->last_error = e.what();
        return PLM_ERR_NUMERIC;
    } catch (const plm::DataError& e) {
        session->last_error = e.what();
        return PLM_ERR_DATA;
    } catch (const std::exception& e) {
        session->last_error = e.what();
        return PLM_ERR_DATA;
    }
}

std::string require(const char* value, const char* what) {
    if (!value) throw plm::UsageError(std::string(what) + " must not be null");
    return value;
}

}  // namespace

extern "C" {

const char* plm_version(void) { return kVersion; }

plm_session* plm_session_new(void) {
    try {
        return new plm_session();
    } catch (...) {
        return nullptr;
    }
}

void plm_session_free(plm_session* session) { delete session; }

const char* plm_last_error(const plm_session* session) {
    return session ? session->last_error.c_str() : "null session";
}

plm_status plm_config_set(plm_session* session, const char* key, const char* value) {
    return guarded(session, [&] {
        session->config.set(require(key, "key"), require(value, "value"));
    });
}

plm_status plm_config_load_file(plm_session* session, const char* path) {
    return guarded(session, [&] { session->config.load_file(require(path, "path")); });
}

plm_status plm_config_get(plm_session* session, const char* key, char* buf, size_t buf_size) {
    return guarded(session, [&] {
        if (!buf || buf_size == 0) throw plm::UsageError("buffer must not be empty");
        const std::string& value = session->config.get(require(key, "key"));
        const size_t n = std::min(buf_size - 1, value.size());
        std::memcpy(buf, value.data(), n);
        buf[n] = '\0';
    });
}

plm_status plm_run_pretrain(plm_session* session, const char* corpus_fasta,
                            const char* out_checkpoint) {
    return guarded(session, [&] {
        plm::run_pretrain(session->config, {require(corpus_fasta, "corpus"),
                                            require(out_checkpoint, "out checkpoint")});
    });
}

plm_status plm_run_finetune(plm_session* session, const char* encoder_checkpoint,
                            const char* task_csv, const char* task_kind, int freeze_encoder,
                            const char* out_checkpoint) {
    return guarded(session, [&] {
        plm::run_finetune(session->config,
                          {require(encoder_checkpoint, "checkpoint"), require(task_csv, "task csv"),
                           require(task_kind, "task kind"), freeze_encoder != 0,
                           require(out_checkpoint, "out checkpoint")});
    });
}

plm_status plm_run_evaluate(plm_session* session, const char* finetuned_checkpoint,
                            const char* task_csv, const char* report_json_path) {
    return guarded(session, [&] {
        plm::run_evaluate(session->config,
                          {require(finetuned_checkpoint, "checkpoint"), require(task_csv, "task csv"),
                           require(report_json_path, "report path")});
    });
}

plm_status plm_run_train_vae(plm_session* session, const char* encoder_checkpoint,
                             const char* corpus_fasta, const char* out_checkpoint) {
    return guarded(session, [&] {
        plm::run_train_vae(session->config,
                           {require(encoder_checkpoint, "checkpoint"), require(corpus_fasta, "corpus"),
                            require(out_checkpoint, "out checkpoint")});
    });
}

plm_status plm_run_generate(plm_session* session, const char* encoder_checkpoint,
                            const char* decoder_checkpoint, const char* seed_fasta,
                            const char* sigma_grid_csv, int n_per_sigma, const char* out_prefix) {
    return guarded(session, [&] {
        plm::GenerateArgs args;
        args.encoder_ckpt = require(encoder_checkpoint, "checkpoint");
        args.decoder_ckpt = require(decoder_checkpoint, "decoder checkpoint");
        args.seed_fasta = require(seed_fasta, "seed fasta");
        args.sigma_grid = require(sigma_grid_csv, "sigma grid");
        args.n_per_sigma = n_per_sigma;
        args.out_prefix = require(out_prefix, "out prefix");
        plm::run_generate(session->config, args);
    });
}

plm_status plm_run_make_synthetic(plm_session* session, const char* task_kind, int n,
                                  const char* out_path) {
    return guarded(session, [&] {
        plm::run_make_synthetic(session->config,
                                {require(task_kind, "task kind"), n, require(out_path, "out path")});
    });
}

plm_status plm_run_rerun(plm_session* session, const char* manifest_path) {
    return guarded(session, [&] { plm::run_rerun(require(manifest_path, "manifest path")); });
}

plm_status plm_encode_sequence(plm_session* session, const char* sequence, int32_t max_len,
                               int32_t* ids_out, int32_t* true_length) {
    return guarded(session, [&] {
        if (!ids_out || !true_length) throw plm::UsageError("output buffers must not be null");
        plm::Vocabulary vocab;
        const auto tokens = plm::encode(vocab, require(sequence, "sequence"), max_len);
        for (size_t i = 0; i < tokens.ids.size(); ++i) ids_out[i] = tokens.ids[i];
        *true_length = tokens.true_length;
    });
}

plm_status plm_sequence_identity(plm_session* session, const char* a, const char* b, double* out) {
    return guarded(session, [&] {
        if (!out) throw plm::UsageError("output pointer must not be null");
        *out = plm::sequence_identity(require(a, "sequence a"), require(b, "sequence b"));
    });
}

}  // extern "C"
