// Acceptance suite: one check per release criterion, each printed as a
// single [PASS]/[FAIL] line. Criteria 1-7 drive the library directly;
// criterion 8 shells out to the CLI binary passed via --cli.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "core/benchmark.hpp"
#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/metrics.hpp"
#include "core/pipeline.hpp"
#include "core/synthetic.hpp"
#include "core/train.hpp"
#include "core/vae.hpp"
#include "double_oracle.hpp"
#include "test_support.hpp"

using namespace plm;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli_path;

struct Failure : std::runtime_error {
    explicit Failure(const std::string& msg) : std::runtime_error(msg) {}
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// ---------------------------------------------------------------- criterion 1

void criterion_gradients() {
    const auto t0 = Clock::now();
    Rng rng(101);
    const double op_tol = 1e-3;
    int instances = 0;

    for (int trial = 0; trial < 20; ++trial) {
        const int m = 2 + static_cast<int>(rng.below(3));
        const int k = 2 + static_cast<int>(rng.below(4));
        const int n = 2 + static_cast<int>(rng.below(3));

        Tensor a = testing::random_tensor({m, k}, rng);
        Tensor b = testing::random_tensor({k, n}, rng);
        require(testing::gradient_check(a, [&] { return mean_all(matmul(a, b)); }) < op_tol, "matmul dA");
        require(testing::gradient_check(b, [&] { return mean_all(matmul(a, b)); }) < op_tol, "matmul dB");

        Tensor x = testing::random_tensor({2, m, k}, rng);
        Tensor y = testing::random_tensor({2, m, k}, rng);
        require(testing::gradient_check(x, [&] { return mean_all(add(x, y)); }) < op_tol, "add");
        require(testing::gradient_check(x, [&] { return mean_all(mul(x, y)); }) < op_tol, "mul");
        require(testing::gradient_check(x, [&] { return mean_all(gelu(x)); }) < op_tol, "gelu");
        // softmax output needs a weighting: its plain mean is constant
        Tensor sm_w = testing::random_tensor({2, m, k}, rng, false);
        require(testing::gradient_check(x, [&] { return mean_all(mul(softmax(x, 2), sm_w)); }) < op_tol,
                "softmax");

        // wide eps bounds inv_std (narrow random rows can land near zero
        // variance, where finite differences are truncation-dominated), and
        // the random weighting breaks the row antisymmetry of normalized
        // outputs; the eps=1e-5 regime is covered by the float64 end-to-end
        // check below
        Tensor gamma = testing::random_tensor({k}, rng);
        Tensor beta = testing::random_tensor({k}, rng);
        Tensor ln_w = testing::random_tensor({2, m, k}, rng, false);
        require(testing::gradient_check(x, [&] {
                    return mean_all(mul(layer_norm(x, gamma, beta, 0.1f), ln_w));
                }) < op_tol,
                "layer_norm dx");
        require(testing::gradient_check(gamma, [&] {
                    return mean_all(mul(layer_norm(x, gamma, beta, 0.1f), ln_w));
                }) < op_tol,
                "layer_norm dgamma");

        Tensor bias = testing::random_tensor({k}, rng);
        require(testing::gradient_check(bias, [&] { return mean_all(add_bias(x, bias)); }) < op_tol,
                "add_bias");

        Tensor p = testing::random_tensor({2, m, k}, rng);
        Tensor q = testing::random_tensor({2, k, n}, rng);
        Tensor u = testing::random_tensor({2, n, k}, rng);
        require(testing::gradient_check(p, [&] { return mean_all(bmm(p, q)); }) < op_tol, "bmm");
        require(testing::gradient_check(u, [&] { return mean_all(bmm_nt(p, u)); }) < op_tol, "bmm_nt");

        // scalar fused losses: wider FD step keeps the float32 oracle above
        // forward rounding noise; truncation stays far below tolerance
        Tensor logits = testing::random_tensor({m * 2, 7}, rng);
        std::vector<int> targets(static_cast<size_t>(m * 2));
        for (auto& t : targets) t = static_cast<int>(rng.below(8)) - 1;  // -1 = ignored
        require(testing::gradient_check(logits, [&] {
                    return cross_entropy(logits, targets, -1);
                }, 5e-3f) < op_tol,
                "cross_entropy");

        Tensor pred = testing::random_tensor({m * 3}, rng);
        std::vector<float> tv(static_cast<size_t>(m * 3));
        for (auto& t : tv) t = rng.normal_f();
        require(testing::gradient_check(pred, [&] { return mse_loss(pred, tv); }, 5e-3f) < op_tol,
                "mse");

        Tensor mu = testing::random_tensor({2, 5}, rng);
        Tensor lv = testing::random_tensor({2, 5}, rng, true, 0.4f);
        std::vector<float> eps(10);
        for (auto& e : eps) e = rng.normal_f();
        require(testing::gradient_check(mu, [&] { return mean_all(reparameterize(mu, lv, eps)); }) <
                    op_tol,
                "reparameterize");
        require(testing::gradient_check(lv, [&] { return kl_standard_normal(mu, lv); }, 5e-3f) <
                    op_tol,
                "kl");
        ++instances;
    }

    // end-to-end: full tiny-model MLM loss against the float64 reference
    // path, a rotating slice of parameter tensors per instance
    EncoderConfig cfg;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.hidden_dim = 8;
    cfg.ffn_dim = 16;
    cfg.max_len = 8;
    cfg.seed = 31;
    EncoderModel model = init_encoder(cfg);
    Vocabulary vocab;
    const auto named = model.named_parameters();

    const auto random_seq = [&rng](size_t len) {
        std::string s(len, 'A');
        for (auto& c : s) c = "ACDEFGHIKLMNPQRSTVWY"[rng.below(20)];
        return s;
    };
    int e2e_instances = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::string seq1 = random_seq(3 + rng.below(4));
        const std::string seq2 = random_seq(2 + rng.below(5));
        std::vector<TokenSequence> batch = {encode(vocab, seq1, 8), encode(vocab, seq2, 8)};
        std::vector<int> labels;
        for (auto& tok : batch) {
            MaskingPolicy policy;
            policy.select_rate = 0.5f;
            policy.seed = mix_seed(500 + trial, labels.size());
            auto masked = apply_mlm_mask(vocab, tok, policy);
            tok.ids = masked.corrupted;
            labels.insert(labels.end(), masked.labels.begin(), masked.labels.end());
        }
        if (std::all_of(labels.begin(), labels.end(), [](int l) { return l == kIgnoreIndex; })) {
            labels[1] = batch[0].ids[1];
        }
        for (auto& p : model.parameters()) p.zero_grad();
        const Tensor h = encode_batch(model, batch, false);
        const Tensor loss =
            cross_entropy(reshape(mlm_logits(model, h), {16, 30}), labels, kIgnoreIndex);
        backward(loss);

        testing::DoubleMlmOracle oracle(model);
        for (int s = 0; s < 4; ++s) {
            const auto& [name, param] = named[(static_cast<size_t>(trial) * 4 + s) % named.size()];
            const auto fd = oracle.fd_grad(name, batch, labels);
            double max_fd = 0.0, max_diff = 0.0;
            for (size_t i = 0; i < fd.size(); ++i) {
                const double ad = param.has_grad() ? static_cast<double>(param.grad()[i]) : 0.0;
                max_fd = std::max(max_fd, std::fabs(fd[i]));
                max_diff = std::max(max_diff, std::fabs(ad - fd[i]));
            }
            const double err = max_diff / std::max(max_fd, 1e-3);
            require(err < 1e-2, "end-to-end MLM gradient of " + name + ", instance " +
                                    std::to_string(trial) + ", rel err " + fmt(err));
        }
        ++e2e_instances;
    }

    const double elapsed = seconds_since(t0);
    require(elapsed < 120.0, "gradient suite exceeded 2 minutes (" + fmt(elapsed) + "s)");
    std::printf("  %d op instances, %d end-to-end instances, %.1fs\n", instances, e2e_instances,
                elapsed);
}

// ---------------------------------------------------------------- criterion 2

void criterion_mlm_overfit() {
    const auto t0 = Clock::now();
    SyntheticConfig scfg;
    scfg.min_len = 20;
    scfg.max_len = 62;
    scfg.seed = 1001;
    std::vector<std::string> corpus;
    for (const auto& rec : make_synthetic_corpus(32, scfg)) corpus.push_back(rec.sequence);

    EncoderConfig cfg;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.hidden_dim = 64;
    cfg.ffn_dim = 256;
    cfg.max_len = 64;
    cfg.seed = 7;
    EncoderModel model = init_encoder(cfg);

    PretrainOptions opts;
    opts.steps = 500;
    opts.batch_size = 16;
    opts.optim.lr = 1e-3f;
    opts.heldout_fraction = 0.0;
    opts.seed = 7;
    const TrainRunReport report = pretrain(model, corpus, opts);

    require(report.loss_trace.size() == 500, "expected 500 loss entries");
    const double first50 =
        std::accumulate(report.loss_trace.begin(), report.loss_trace.begin() + 50, 0.0) / 50.0;
    const double last50 =
        std::accumulate(report.loss_trace.end() - 50, report.loss_trace.end(), 0.0) / 50.0;
    require(last50 < first50, "loss mean did not drop: first50 " + fmt(first50) + " vs last50 " +
                                  fmt(last50));

    const double acc = report.final_metrics.at("masked_accuracy_train");
    require(acc >= 0.95, "masked-token training accuracy " + fmt(acc) + " < 0.95");

    const double elapsed = seconds_since(t0);
    require(elapsed < 600.0, "MLM overfit exceeded 10 minutes");
    std::printf("  masked accuracy %.4f, loss %.3f -> %.3f, %.1fs\n", acc, first50, last50, elapsed);
}

// ---------------------------------------------------------------- criterion 3

Dataset with_fixed_splits(Dataset ds, int n_train, int n_test) {
    ds.splits.train.clear();
    ds.splits.valid.clear();
    ds.splits.test.clear();
    for (int i = 0; i < n_train; ++i) ds.splits.train.push_back(i);
    for (int i = n_train; i < n_train + n_test; ++i) ds.splits.test.push_back(i);
    return ds;
}

void criterion_finetune_suite() {
    const auto t0 = Clock::now();
    EncoderConfig cfg;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.hidden_dim = 64;
    cfg.ffn_dim = 256;
    cfg.max_len = 64;

    SyntheticConfig scfg;
    scfg.min_len = 20;
    scfg.max_len = 50;

    // motif sequence classification: accuracy >= 0.90 on 200 train / 50 test
    {
        scfg.seed = 2001;
        const Dataset ds = with_fixed_splits(make_motif_classification(250, scfg), 200, 50);
        cfg.seed = 11;
        EncoderModel model = init_encoder(cfg);
        TaskHead head = init_task_head(TaskKind::sequence_classification, 64, 64, 2, 11);
        FinetuneOptions opts;
        opts.steps = 300;
        opts.batch_size = 16;
        opts.seed = 11;
        finetune(model, head, ds, opts);
        const MetricResult r = evaluate_split(model, head, ds, "test");
        require(r.value >= 0.90, "motif accuracy " + fmt(r.value) + " < 0.90");
        std::printf("  motif classification accuracy %.4f\n", r.value);
    }

    // residue-window token classification: AUC-ROC >= 0.90
    {
        scfg.seed = 2002;
        const Dataset ds = with_fixed_splits(make_residue_window(250, scfg), 200, 50);
        cfg.seed = 12;
        EncoderModel model = init_encoder(cfg);
        TaskHead head = init_task_head(TaskKind::token_classification, 64, 64, 2, 12);
        FinetuneOptions opts;
        opts.steps = 200;
        opts.batch_size = 16;
        opts.seed = 12;
        finetune(model, head, ds, opts);
        const MetricResult r = evaluate_split(model, head, ds, "test");
        require(r.value >= 0.90, "token AUC " + fmt(r.value) + " < 0.90");
        std::printf("  residue-window token AUC %.4f\n", r.value);
    }

    // composition regression: Spearman rho >= 0.90
    {
        scfg.seed = 2003;
        const Dataset ds = with_fixed_splits(make_composition_regression(250, scfg), 200, 50);
        cfg.seed = 13;
        EncoderModel model = init_encoder(cfg);
        TaskHead head = init_task_head(TaskKind::sequence_regression, 64, 64, 2, 13);
        FinetuneOptions opts;
        opts.steps = 300;
        opts.batch_size = 16;
        opts.seed = 13;
        finetune(model, head, ds, opts);
        const MetricResult r = evaluate_split(model, head, ds, "test");
        require(r.value >= 0.90, "regression Spearman " + fmt(r.value) + " < 0.90");
        std::printf("  composition regression Spearman %.4f\n", r.value);
    }

    const double elapsed = seconds_since(t0);
    require(elapsed < 1800.0, "fine-tune suite exceeded budget");
    std::printf("  fine-tune suite total %.1fs\n", elapsed);
}

// ---------------------------------------------------------------- criterion 4

double auc_pair_counting(const std::vector<double>& scores, const std::vector<int>& labels) {
    double num = 0.0;
    int64_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                num += 1.0;
            } else if (scores[i] == scores[j]) {
                num += 0.5;
            }
        }
    }
    return num / static_cast<double>(pairs);
}

double spearman_rank_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rank = [](const std::vector<double>& v) {
        std::vector<double> out(v.size());
        for (size_t i = 0; i < v.size(); ++i) {
            int less = 0, equal = 0;
            for (double w : v) {
                if (w < v[i]) ++less;
                if (w == v[i]) ++equal;
            }
            out[i] = less + 1 + 0.5 * (equal - 1);
        }
        return out;
    };
    const auto rx = rank(x), ry = rank(y);
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < rx.size(); ++i) {
        sx += rx[i];
        sy += ry[i];
        sxy += rx[i] * ry[i];
        sxx += rx[i] * rx[i];
        syy += ry[i] * ry[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

int levenshtein_table(const std::string& a, const std::string& b) {
    std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1));
    for (size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
    for (size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
    }
    return d[a.size()][b.size()];
}

void criterion_metric_oracles() {
    Rng rng(4001);
    const char* alphabet = "ACDEFGHIKLMNPQRSTVWY";
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 5 + static_cast<int>(rng.below(50));

        std::vector<double> scores(static_cast<size_t>(n));
        std::vector<int> labels(static_cast<size_t>(n));
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            scores[static_cast<size_t>(i)] = std::floor(rng.uniform() * 10.0) / 10.0;
            labels[static_cast<size_t>(i)] = rng.uniform() < 0.5 ? 1 : 0;
            pos += labels[static_cast<size_t>(i)];
        }
        if (pos == 0) labels[0] = 1;
        if (pos == n) labels[0] = 0;
        require(std::fabs(auc_roc(scores, labels) - auc_pair_counting(scores, labels)) < 1e-12,
                "AUC oracle mismatch at instance " + std::to_string(trial));

        std::vector<double> x(static_cast<size_t>(n)), y(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            x[static_cast<size_t>(i)] = std::floor(rng.uniform() * 9.0);
            y[static_cast<size_t>(i)] = std::floor(rng.uniform() * 9.0);
        }
        x[0] = -2;
        x[1] = 11;
        y[0] = -2;
        y[1] = 11;
        require(std::fabs(spearman_rho(x, y) - spearman_rank_pearson(x, y)) < 1e-12,
                "Spearman oracle mismatch at instance " + std::to_string(trial));

        std::string a(1 + rng.below(25), 'A'), b(1 + rng.below(25), 'A');
        for (auto& c : a) c = alphabet[rng.below(20)];
        for (auto& c : b) c = alphabet[rng.below(20)];
        const double want = 1.0 - static_cast<double>(levenshtein_table(a, b)) /
                                      static_cast<double>(std::max(a.size(), b.size()));
        require(std::fabs(sequence_identity(a, b) - want) < 1e-12,
                "identity oracle mismatch at instance " + std::to_string(trial));

        // monotone-transform invariance for this instance
        const double slope = 0.5 + rng.uniform() * 2.0;
        const double shift = rng.normal();
        std::vector<double> mapped(scores);
        for (auto& s : mapped) s = std::exp(slope * s + shift);
        require(std::fabs(auc_roc(scores, labels) - auc_roc(mapped, labels)) < 1e-12,
                "AUC not monotone-invariant at instance " + std::to_string(trial));
        std::vector<double> x_mapped(x);
        for (auto& s : x_mapped) s = slope * s + shift;
        require(std::fabs(spearman_rho(x, y) - spearman_rho(x_mapped, y)) < 1e-12,
                "Spearman not monotone-invariant at instance " + std::to_string(trial));
    }
    std::printf("  200 instances per metric, all within 1e-12; invariance holds\n");
}

// ------------------------------------------------------- criteria 5 and 6

struct OverfitVae {
    EncoderModel encoder;
    DecoderModel decoder;
    std::vector<FastaRecord> seeds;
};

OverfitVae overfit_vae() {
    SyntheticConfig scfg;
    scfg.min_len = 12;
    scfg.max_len = 24;
    scfg.seed = 5001;
    const auto records = make_synthetic_corpus(16, scfg);

    EncoderConfig ecfg;
    ecfg.num_layers = 2;
    ecfg.num_heads = 4;
    ecfg.hidden_dim = 64;
    ecfg.ffn_dim = 256;
    ecfg.max_len = 32;
    ecfg.seed = 51;

    DecoderConfig dcfg;
    dcfg.num_layers = 2;
    dcfg.num_heads = 4;
    dcfg.hidden_dim = 64;
    dcfg.ffn_dim = 256;
    dcfg.z_dim = 16;
    dcfg.max_len = 32;
    dcfg.seed = 52;

    OverfitVae out{init_encoder(ecfg), init_decoder(dcfg, ecfg.hidden_dim), records};

    std::vector<std::string> corpus;
    for (const auto& rec : records) corpus.push_back(rec.sequence);

    const auto before = [&] {
        std::vector<float> snapshot;
        for (const auto& p : out.encoder.parameters()) {
            snapshot.insert(snapshot.end(), p.values().begin(), p.values().end());
        }
        return snapshot;
    }();

    VaeTrainConfig vcfg;
    vcfg.epochs = 1500;  // one step per epoch at batch 16: overfit hard
    vcfg.batch_size = 16;
    vcfg.kl_weight = 0.1f;
    vcfg.lr = 1e-3f;
    vcfg.seed = 53;
    const TrainRunReport report = train_vae(out.encoder, out.decoder, corpus, vcfg);

    // frozen-encoder contract
    std::vector<float> after;
    for (const auto& p : out.encoder.parameters()) {
        after.insert(after.end(), p.values().begin(), p.values().end());
    }
    require(before == after, "encoder parameters changed during train_vae");
    std::printf("  final reconstruction %.4f nats/token, final KL %.4f\n",
                report.final_metrics.at("final_reconstruction_nats_per_token"),
                report.final_metrics.at("final_kl"));
    return out;
}

OverfitVae& shared_vae() {
    static OverfitVae instance = overfit_vae();
    return instance;
}

void criterion_vae_reconstruction() {
    const auto t0 = Clock::now();
    auto& vae = shared_vae();

    GenerationConfig gen;
    gen.sampling = SamplingMode::greedy;
    gen.max_len = 32;
    double total = 0.0;
    for (const auto& rec : vae.seeds) {
        const LatentVector z = encode_latent(vae.encoder, vae.decoder, rec.sequence, false, 0);
        const std::string decoded = generate(vae.decoder, z, gen);
        total += decoded.empty() ? 0.0 : sequence_identity(decoded, rec.sequence);
    }
    const double mean_identity = total / static_cast<double>(vae.seeds.size());
    require(mean_identity >= 0.90,
            "sigma=0 greedy reconstruction identity " + fmt(mean_identity) + " < 0.90");
    std::printf("  mean reconstruction identity %.4f over %zu seeds, %.1fs\n", mean_identity,
                vae.seeds.size(), seconds_since(t0));
}

void criterion_noise_trend() {
    const auto t0 = Clock::now();
    auto& vae = shared_vae();

    const std::vector<float> sigma_grid = {0.0f, 0.5f, 1.0f, 2.0f};
    GenerationConfig gen;
    gen.sampling = SamplingMode::greedy;
    gen.max_len = 32;
    gen.seed = 606;
    // 20 samples per sigma per seed, over a handful of seeds
    std::vector<FastaRecord> seeds(vae.seeds.begin(), vae.seeds.begin() + 4);
    const GenerationReport report =
        seed_generation_campaign(vae.encoder, vae.decoder, seeds, sigma_grid, 20, gen);
    require(report.rows.size() == seeds.size() * sigma_grid.size() * 20, "row count mismatch");

    std::vector<double> mean(sigma_grid.size(), 0.0);
    std::vector<double> sq(sigma_grid.size(), 0.0);
    std::vector<int> count(sigma_grid.size(), 0);
    for (const auto& row : report.rows) {
        for (size_t g = 0; g < sigma_grid.size(); ++g) {
            if (row.sigma == sigma_grid[g]) {
                mean[g] += row.identity;
                sq[g] += row.identity * row.identity;
                ++count[g];
            }
        }
    }
    std::vector<double> se(sigma_grid.size(), 0.0);
    for (size_t g = 0; g < sigma_grid.size(); ++g) {
        mean[g] /= count[g];
        const double var = std::max(0.0, sq[g] / count[g] - mean[g] * mean[g]);
        se[g] = std::sqrt(var / count[g]);
        std::printf("  sigma %.1f: mean identity %.4f (se %.4f, n=%d)\n",
                    static_cast<double>(sigma_grid[g]), mean[g], se[g], count[g]);
    }
    for (size_t g = 0; g + 1 < sigma_grid.size(); ++g) {
        const double tolerance = std::sqrt(se[g] * se[g] + se[g + 1] * se[g + 1]);
        require(mean[g + 1] <= mean[g] + tolerance,
                "identity increased from sigma " + fmt(sigma_grid[g]) + " to " +
                    fmt(sigma_grid[g + 1]) + " beyond one standard error");
    }
    require(mean.back() < mean.front(), "identity at sigma=2 is not strictly below sigma=0");
    std::printf("  trend check %.1fs\n", seconds_since(t0));
}

// ---------------------------------------------------------------- criterion 7

void criterion_format_round_trips() {
    // FASTA: write -> parse identity on 100 random records
    Rng rng(7001);
    const char* alphabet = "ACDEFGHIKLMNPQRSTVWYXUBZO";
    std::vector<FastaRecord> records;
    for (int i = 0; i < 100; ++i) {
        std::string seq(1 + rng.below(300), 'A');
        for (auto& c : seq) c = alphabet[rng.below(25)];
        records.push_back({"record " + std::to_string(i) + " extra=" + std::to_string(rng.below(99)),
                           seq});
    }
    std::ostringstream out;
    write_fasta(records, out);
    std::istringstream in(out.str());
    const auto parsed = read_fasta(in);
    require(parsed.size() == records.size(), "fasta round trip lost records");
    for (size_t i = 0; i < records.size(); ++i) {
        require(parsed[i].header == records[i].header && parsed[i].sequence == records[i].sequence,
                "fasta round trip mismatch at " + std::to_string(i));
    }

    // checkpoint: save -> load bit-exact, save -> load -> save byte-identical
    EncoderConfig cfg;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.hidden_dim = 8;
    cfg.ffn_dim = 16;
    cfg.max_len = 16;
    cfg.seed = 71;
    RunConfig rc;
    rc.set("encoder.num_layers", "1");
    rc.set("encoder.num_heads", "2");
    rc.set("encoder.hidden_dim", "8");
    rc.set("encoder.ffn_dim", "16");
    rc.set("max_len", "16");
    rc.set("seed", "71");
    const EncoderModel model = init_encoder(cfg);
    save_encoder_checkpoint("acc_ckpt_a.plm", model, rc.values());
    const EncoderModel loaded = load_encoder_checkpoint("acc_ckpt_a.plm");
    const auto pa = model.parameters();
    const auto pb = loaded.parameters();
    for (size_t i = 0; i < pa.size(); ++i) {
        for (int64_t j = 0; j < pa[i].numel(); ++j) {
            require(pa[i].values()[static_cast<size_t>(j)] == pb[i].values()[static_cast<size_t>(j)],
                    "checkpoint round trip not bit-exact");
        }
    }
    save_encoder_checkpoint("acc_ckpt_b.plm", loaded, rc.values());
    std::ifstream fa("acc_ckpt_a.plm", std::ios::binary), fb("acc_ckpt_b.plm", std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    require(!ba.empty() && ba == bb, "save -> load -> save is not byte-identical");
    std::remove("acc_ckpt_a.plm");
    std::remove("acc_ckpt_b.plm");

    // CSV loader rejects each documented malformed case with its error kind
    const TaskSpec cls = TaskSpec::make("t", TaskKind::sequence_classification, 2);
    const TaskSpec tok = TaskSpec::make("t", TaskKind::token_classification, 2);
    const auto write_tmp = [](const std::string& text) {
        std::ofstream f("acc_case.csv", std::ios::trunc);
        f << text;
    };
    const auto expect_kind = [&](const TaskSpec& spec, CsvError::Kind kind, const char* what) {
        try {
            load_task_csv("acc_case.csv", spec, 1);
            throw Failure(std::string("csv case not rejected: ") + what);
        } catch (const CsvError& e) {
            require(e.kind == kind, std::string("wrong csv error kind for ") + what);
        }
    };
    write_tmp("seq,label\nACD,0\n");
    expect_kind(cls, CsvError::Kind::bad_header, "bad header");
    write_tmp("sequence,label\nACD,zebra\n");
    expect_kind(cls, CsvError::Kind::label_parse, "label parse");
    write_tmp("sequence,label\nACDE,011\n");
    expect_kind(tok, CsvError::Kind::label_length, "token label length");
    write_tmp("sequence,label,split\nACD,0,dev\n");
    expect_kind(cls, CsvError::Kind::unknown_split, "unknown split");
    write_tmp("sequence,label\nACD,0,train\n");
    expect_kind(cls, CsvError::Kind::bad_row, "field count");
    std::remove("acc_case.csv");

    std::printf("  fasta x100, checkpoint byte-identity, 5 csv rejection cases\n");
}

// ---------------------------------------------------------------- criterion 8

int run_cli(const std::string& args) {
    const std::string cmd = g_cli_path + " " + args + " >> acceptance_e2e/cli.log 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WEXITSTATUS(rc);
}

void criterion_end_to_end() {
    require(!g_cli_path.empty(), "criterion 8 needs --cli <path to plm binary>");
    const auto t0 = Clock::now();
    std::system("rm -rf acceptance_e2e && mkdir -p acceptance_e2e");

    // no arguments: usage, exit 1
    require(run_cli("") == 1, "bare invocation should exit 1");

    const std::string base =
        " --set max_len=48 --set encoder.num_layers=1 --set encoder.hidden_dim=32"
        " --set encoder.ffn_dim=64 --set encoder.num_heads=2"
        " --set decoder.num_layers=1 --set decoder.hidden_dim=32 --set decoder.ffn_dim=64"
        " --set decoder.num_heads=2 --set decoder.z_dim=8"
        " --set synth.min_len=12 --set synth.max_len=30"
        " --set pretrain.steps=40 --set finetune.steps=60 --set vae.epochs=20";

    require(run_cli("make-synthetic --task-kind corpus --n 32 --out acceptance_e2e/corpus.fasta" +
                    base) == 0,
            "make-synthetic corpus failed");
    require(run_cli("make-synthetic --task-kind motif-classification --n 60 --out "
                    "acceptance_e2e/task.csv" +
                    base) == 0,
            "make-synthetic task failed");
    require(run_cli("--seed 9 make-synthetic --task-kind corpus --n 3 --out acceptance_e2e/seeds.fasta" +
                    base) == 0,
            "make-synthetic seeds failed");

    require(run_cli("pretrain --corpus acceptance_e2e/corpus.fasta --out acceptance_e2e/enc.plm" +
                    base) == 0,
            "pretrain failed");
    require(run_cli("finetune --ckpt acceptance_e2e/enc.plm --task-csv acceptance_e2e/task.csv"
                    " --task-kind sequence-classification --out acceptance_e2e/ft.plm" +
                    base) == 0,
            "finetune failed");
    require(run_cli("evaluate --ckpt acceptance_e2e/ft.plm --task-csv acceptance_e2e/task.csv"
                    " --report acceptance_e2e/report.json" +
                    base) == 0,
            "evaluate failed");

    // schema-valid report with the reference numbers carried verbatim
    std::ifstream rf("acceptance_e2e/report.json");
    require(static_cast<bool>(rf), "report.json missing");
    nlohmann::json report = nlohmann::json::parse(rf);
    for (const char* key : {"task", "split", "metrics", "reference", "config", "seed"}) {
        require(report.contains(key), std::string("report missing key ") + key);
    }
    require(report["metrics"].is_array() && !report["metrics"].empty(), "metrics array empty");
    for (const auto& m : report["metrics"]) {
        require(m.contains("name") && m.contains("value") && m.contains("support"),
                "metric entry incomplete");
    }
    const auto& ref = report["reference"];
    require(ref.contains("sub_cellular_localization_accuracy"), "reference keys missing");
    require(ref["sub_cellular_localization_accuracy"].get<double>() == 69.7, "reference 69.7");
    require(ref["membrane_solubility_accuracy"].get<double>() == 85.2, "reference 85.2");
    require(ref["epitope_region_auc_roc"].get<double>() == 66.73, "reference 66.73");
    require(ref["gb1_fitness_spearman"].get<double>() == 0.43, "reference 0.43");

    // decoder training and generation
    require(run_cli("train-vae --ckpt acceptance_e2e/enc.plm --corpus acceptance_e2e/corpus.fasta"
                    " --out acceptance_e2e/dec.plm" +
                    base) == 0,
            "train-vae failed");
    require(run_cli("generate --ckpt acceptance_e2e/enc.plm --decoder-ckpt acceptance_e2e/dec.plm"
                    " --seed-fasta acceptance_e2e/seeds.fasta --sigma-grid 0,0.5 --n 4"
                    " --out-prefix acceptance_e2e/gen" +
                    base) == 0,
            "generate failed");

    // generation report row count: 3 seeds x 2 sigmas x 4 samples
    std::ifstream gc("acceptance_e2e/gen.csv");
    require(static_cast<bool>(gc), "gen.csv missing");
    int rows = 0;
    std::string line;
    std::getline(gc, line);
    require(line == "seed_id,sigma,sample_idx,length,identity", "gen.csv header mismatch");
    while (std::getline(gc, line)) {
        if (!line.empty()) ++rows;
    }
    require(rows == 3 * 2 * 4, "generation row count " + std::to_string(rows) + " != 24");

    // manifest-driven reproduction must be bit-identical (rerun verifies)
    require(run_cli("rerun --manifest acceptance_e2e/report.json.manifest.json") == 0,
            "rerun of evaluate did not reproduce bit-identically");
    require(run_cli("rerun --manifest acceptance_e2e/gen.manifest.json") == 0,
            "rerun of generate did not reproduce bit-identically");

    std::printf("  pipeline, schema, references, %d generation rows, rerun verified, %.1fs\n", rows,
                seconds_since(t0));
}

// ----------------------------------------------------------------------------

struct Criterion {
    int number;
    const char* name;
    std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) {
            g_cli_path = argv[++i];
        } else {
            selected.push_back(std::atoi(arg.c_str()));
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "gradient suite vs central finite differences", criterion_gradients},
        {2, "MLM overfit to >= 0.95 masked accuracy", criterion_mlm_overfit},
        {3, "fine-tune suite on the three synthetic task kinds", criterion_finetune_suite},
        {4, "metric oracle equivalence within 1e-12", criterion_metric_oracles},
        {5, "VAE reconstruction at sigma=0, frozen encoder", criterion_vae_reconstruction},
        {6, "noise-variation trend over the sigma grid", criterion_noise_trend},
        {7, "format round trips and rejection cases", criterion_format_round_trips},
        {8, "end-to-end CLI pipeline with manifest rerun", criterion_end_to_end},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), criterion.number) == selected.end()) {
            continue;
        }
        try {
            criterion.run();
            std::printf("[PASS] criterion %d: %s\n", criterion.number, criterion.name);
        } catch (const std::exception& e) {
            std::printf("[FAIL] criterion %d: %s — %s\n", criterion.number, criterion.name, e.what());
            ++failures;
        }
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
