#include "tgiqa/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "tgiqa/causal.hpp"
#include "tgiqa/corruptions.hpp"
#include "tgiqa/image.hpp"
#include "tgiqa/kernels.hpp"
#include "tgiqa/predictability.hpp"
#include "tgiqa/report.hpp"
#include "tgiqa/stats.hpp"
#include "tgiqa/tensor_io.hpp"
#include "tgiqa/tg_iqa.hpp"

namespace fs = std::filesystem;

namespace tgiqa::cli {

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::IoError:
        case Errc::MissingImage:
        case Errc::BadMagic:
        case Errc::UnsupportedDtype:
        case Errc::UnsupportedOrder:
        case Errc::UnsupportedShape:
        case Errc::TruncatedPayload:
        case Errc::MalformedLine:
        case Errc::MalformedRow:
        case Errc::BadFormat:
        case Errc::UnsupportedMaxval:
        case Errc::TruncatedPixels:
            return kIo;
        default:
            return kUsage;
    }
}

namespace {

struct RunConfig {
    std::string manifest;
    std::string images;
    std::string logits;
    std::string embeddings;
    std::string text_weights;
    std::vector<std::string> ingest;
    std::string scores;
    std::string correctness;
    std::vector<std::string> metrics;
    std::vector<std::string> models;
    std::string derive_model;
    std::string correctness_out;
    std::uint64_t seed = 0;
    std::string out;
    double temperature = kDefaultTemperature;
    std::optional<double> p_c;
    int n_min = 1;
    int n_max = 20;
    std::string severities = "1,2,3";
    std::string corruptions;
    std::size_t resamples = 1000;
    std::size_t permutations = 1000;
    std::size_t folds = 5;
    std::size_t sim_n = 1000000;
    bool inject_wrong = false;
    std::string scm = "baseline_sim";
    std::size_t n = 1000;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::vector<int> parse_severities(const std::string& text) {
    std::vector<int> out;
    for (const auto& s : split_list(text)) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            out.push_back(v);
        } catch (const std::logic_error&) {
            throw Error(Errc::InvalidArgument, "bad severity '" + s + "'");
        }
    }
    if (out.empty()) throw Error(Errc::InvalidArgument, "severity set is empty");
    return out;
}

std::vector<CorruptionKind> parse_kinds(const std::string& text) {
    if (text.empty()) return {kAllCorruptions.begin(), kAllCorruptions.end()};
    std::vector<CorruptionKind> out;
    for (const auto& s : split_list(text)) out.push_back(parse_corruption(s));
    if (out.empty()) throw Error(Errc::InvalidArgument, "corruption set is empty");
    return out;
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw Error(Errc::InvalidArgument, std::string("missing required ") + flag);
}

std::string file_stem(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
    return out;
}

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string repr(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------

int cmd_score(const RunConfig& cfg, std::ostream& out) {
    require(cfg.manifest, "--manifest");
    require(cfg.out, "--out");
    const DatasetManifest manifest = load_manifest(cfg.manifest);
    const fs::path root = cfg.images.empty() ? fs::path(cfg.manifest).parent_path() : fs::path(cfg.images);

    ScoreTable table;
    std::set<std::string> requested(cfg.metrics.begin(), cfg.metrics.end());
    if (requested.empty() && cfg.ingest.empty()) requested.insert("tv");
    for (const auto& m : requested) {
        if (m != "tv" && m != "tg" && m != "zsclip") throw Error(Errc::InvalidArgument, "unknown metric '" + m + "'");
    }

    if (requested.count("tv")) {
        const auto tv = kernels::omp::fill_rows(manifest.size(), 1, [&](std::size_t i, std::span<double> row) {
            const fs::path path = root / manifest.entries[i].path;
            try {
                row[0] = total_variation(decode_pnm(read_file_bytes(path)));
            } catch (const Error& e) {
                throw Error(e.code(), path.string() + " (manifest line " + std::to_string(i + 1) + "): " + e.what());
            }
        });
        for (std::size_t i = 0; i < manifest.size(); ++i) table.add(manifest.entries[i].key(), "tv", tv[i]);
    }
    if (requested.count("tg")) {
        require(cfg.logits, "--logits");
        const TensorF32 logits = load_npy(cfg.logits);
        check_alignment(logits, manifest, cfg.logits);
        append_quality_scores(table, manifest, strong_tg_scores(logits), "tg");
    }
    if (requested.count("zsclip")) {
        require(cfg.embeddings, "--embeddings");
        require(cfg.text_weights, "--text-weights");
        const TensorF32 z = load_npy(cfg.embeddings);
        check_alignment(z, manifest, cfg.embeddings);
        const TensorF32 w = load_npy(cfg.text_weights);
        const TensorF32 s = zeroshot_similarities(normalize_rows(z), normalize_rows(w));
        append_quality_scores(table, manifest, zsclip_scores(s, cfg.temperature), "zsclip");
    }
    for (const auto& path : cfg.ingest) {
        for (auto& r : load_scores(path).records) table.add(r.key, r.metric, r.value);
    }
    write_scores(table, cfg.out);
    out << "wrote " << table.records.size() << " score rows to " << cfg.out << "\n";

    if (!cfg.derive_model.empty()) {
        require(cfg.logits, "--logits");
        require(cfg.correctness_out, "--correctness-out");
        const TensorF32 logits = load_npy(cfg.logits);
        const auto correct = correctness_from_logits(logits, manifest, cfg.derive_model);
        write_correctness(correct, cfg.correctness_out);
        out << "wrote " << correct.records.size() << " correctness rows to " << cfg.correctness_out << "\n";
    }
    return kOk;
}

std::vector<JoinedSample> restrict_to(const std::vector<JoinedSample>& samples, const DatasetManifest& manifest) {
    std::set<SampleKey> keys;
    for (const auto& e : manifest.entries) keys.insert(e.key());
    std::vector<JoinedSample> out;
    for (const auto& s : samples) {
        if (keys.count(s.key)) out.push_back(s);
    }
    return out;
}

int cmd_mixture(const RunConfig& cfg, std::ostream& out) {
    require(cfg.manifest, "--manifest");
    require(cfg.out, "--out");
    MixturePolicy base;
    base.corruptions = parse_kinds(cfg.corruptions);
    base.severities = parse_severities(cfg.severities);
    base.seed = cfg.seed;
    const DatasetManifest clean = load_manifest(cfg.manifest);
    const fs::path dir(cfg.out);

    if (cfg.p_c) {
        MixturePolicy policy = base;
        policy.p_c = *cfg.p_c;
        const auto mixed = build_mixture(clean, policy);
        save_manifest(mixed, dir / "mixture.jsonl");
        out << "p_c=" << fixed(policy.p_c, 4) << " corrupted=" << corrupted_count(clean.size(), policy.p_c) << "\n";
        return kOk;
    }
    if (cfg.n_min < 0 || cfg.n_max > 100 || cfg.n_min > cfg.n_max) {
        throw Error(Errc::InvalidArgument, "sweep range must satisfy 0 <= n-min <= n-max <= 100");
    }

    const bool predict = !cfg.scores.empty() || !cfg.correctness.empty();
    std::vector<JoinedSample> joined;
    std::string metric;
    std::string model;
    if (predict) {
        require(cfg.scores, "--scores");
        require(cfg.correctness, "--correctness");
        const auto scores = load_scores(cfg.scores);
        const auto correct = load_correctness(cfg.correctness);
        // Without flags, fall back to the table's only metric/model.
        const auto metrics = cfg.metrics.empty() ? scores.metrics() : cfg.metrics;
        const auto models = cfg.models.empty() ? correct.models() : cfg.models;
        if (metrics.size() != 1 || models.size() != 1) {
            throw Error(Errc::InvalidArgument, "the sweep report takes exactly one --metrics and one --models value");
        }
        metric = metrics.front();
        model = models.front();
        joined = join_samples(scores, correct, metric, model);
    }

    std::string csv = "n_percent,p_c,images,corrupted,auc,auc_lo,auc_hi,ce\n";
    std::vector<LinePoint> points;
    for (int n = cfg.n_min; n <= cfg.n_max; ++n) {
        MixturePolicy policy = base;
        policy.p_c = n / 100.0;
        policy.seed = sweep_variant_seed(cfg.seed, n);
        const auto mixed = build_mixture(clean, policy);
        char name[32];
        std::snprintf(name, sizeof name, "mixture_pc%03d.jsonl", n);
        save_manifest(mixed, dir / name);
        const std::size_t corrupted = corrupted_count(clean.size(), policy.p_c);
        out << name << " corrupted=" << corrupted << "\n";
        if (!predict) continue;

        const auto subset = restrict_to(joined, mixed);
        PredictOptions opts;
        opts.bootstrap.resamples = cfg.resamples;
        opts.bootstrap.seed = cfg.seed;
        const auto r = pointwise_predictability(subset, SplitSpec{0.8, cfg.seed}, opts);
        csv += std::to_string(n) + "," + repr(policy.p_c) + "," + std::to_string(clean.size()) + "," +
               std::to_string(corrupted) + "," + repr(r.auc) + "," + repr(r.auc_ci.lo) + "," + repr(r.auc_ci.hi) +
               "," + repr(r.ce) + "\n";
        points.push_back({policy.p_c, r.auc, r.auc_ci.lo, r.auc_ci.hi});
    }
    if (predict) {
        write_file_text(dir / "auc_vs_pc.csv", csv);
        write_file_text(dir / "auc_vs_pc.svg", line_chart_svg(points, "p_c", "AUC (" + metric + ", " + model + ")"));
        out << "wrote " << (dir / "auc_vs_pc.csv").string() << "\n";
    }
    return kOk;
}

int cmd_corrupt(const RunConfig& cfg, std::ostream& out) {
    require(cfg.manifest, "--manifest");
    require(cfg.out, "--out");
    MixturePolicy policy;
    policy.corruptions = parse_kinds(cfg.corruptions);
    policy.severities = parse_severities(cfg.severities);
    policy.seed = cfg.seed;
    policy.p_c = cfg.p_c.value_or(1.0);
    const DatasetManifest clean = load_manifest(cfg.manifest);
    const fs::path root = cfg.images.empty() ? fs::path(cfg.manifest).parent_path() : fs::path(cfg.images);
    const auto mixed = corrupt_dataset(clean, policy, root, cfg.out);
    save_manifest(mixed, fs::path(cfg.out) / "manifest.jsonl");
    out << "corrupted " << corrupted_count(clean.size(), policy.p_c) << " of " << clean.size() << " images\n";
    return kOk;
}

struct Inputs {
    ScoreTable scores;
    CorrectnessTable correctness;
    std::vector<std::string> metrics;
    std::vector<std::string> models;
    std::optional<std::map<std::string, int>> labels;
};

Inputs load_inputs(const RunConfig& cfg) {
    require(cfg.scores, "--scores");
    require(cfg.correctness, "--correctness");
    Inputs in;
    in.scores = load_scores(cfg.scores);
    in.correctness = load_correctness(cfg.correctness);
    in.metrics = cfg.metrics.empty() ? in.scores.metrics() : cfg.metrics;
    in.models = cfg.models.empty() ? in.correctness.models() : cfg.models;
    if (in.metrics.empty() || in.models.empty()) throw Error(Errc::InvalidArgument, "no metrics or models to report");
    if (!cfg.manifest.empty()) in.labels = labels_by_image(load_manifest(cfg.manifest));
    return in;
}

PredictabilitySummary summarize(const Inputs& in, const std::string& metric, const std::string& model,
                                const RunConfig& cfg, bool with_images) {
    const auto joined = join_samples(in.scores, in.correctness, metric, model);
    PredictOptions opts;
    opts.bootstrap.resamples = cfg.resamples;
    opts.bootstrap.seed = cfg.seed;
    PredictabilitySummary s;
    s.metric = metric;
    s.model = model;
    s.pointwise = pointwise_predictability(joined, SplitSpec{0.8, cfg.seed}, opts);
    if (in.labels) s.per_label = per_label_predictability(joined, *in.labels, cfg.folds, cfg.seed);
    if (with_images) s.per_image = per_image_kfold(joined, cfg.folds, cfg.seed);
    return s;
}

int cmd_report(const RunConfig& cfg, std::ostream& out) {
    require(cfg.out, "--out");
    const Inputs in = load_inputs(cfg);
    const fs::path dir(cfg.out);
    std::string csv = correlation_csv_header() + "\n";
    std::vector<PredictabilitySummary> summaries;
    ReportOptions ropts;
    ropts.resamples = cfg.resamples;
    ropts.permutations = cfg.permutations;
    ropts.seed = cfg.seed;
    for (const auto& metric : in.metrics) {
        for (const auto& model : in.models) {
            const auto groups = group_means(in.scores, in.correctness, metric, model);
            const auto rep = correlation_report(groups, metric, model, ropts);
            csv += correlation_csv_row(rep) + "\n";
            write_file_text(dir / ("scatter_" + file_stem(metric) + "__" + file_stem(model) + ".svg"),
                            scatter_svg(groups, "mean " + metric, "accuracy (" + model + ")"));
            summaries.push_back(summarize(in, metric, model, cfg, false));
            const auto& p = summaries.back().pointwise;
            out << metric << " / " << model << ": groups=" << rep.groups << " KRCC=" << fixed(rep.krcc.value, 3)
                << " SRCC=" << fixed(rep.srcc.value, 3) << " PLCC=" << fixed(rep.plcc.value, 3)
                << " AUC=" << fixed(p.auc, 3) << " CE=" << fixed(p.ce, 3) << "\n";
        }
    }
    write_file_text(dir / "correlation.csv", csv);
    write_file_text(dir / "predictability.json", predictability_json(summaries));
    return kOk;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
    require(cfg.out, "--out");
    const Inputs in = load_inputs(cfg);
    std::vector<PredictabilitySummary> summaries;
    for (const auto& metric : in.metrics) {
        for (const auto& model : in.models) {
            summaries.push_back(summarize(in, metric, model, cfg, true));
            const auto& s = summaries.back();
            out << metric << " / " << model << ": AUC=" << fixed(s.pointwise.auc, 4) << " ["
                << fixed(s.pointwise.auc_ci.lo, 4) << ", " << fixed(s.pointwise.auc_ci.hi, 4)
                << "] CE=" << fixed(s.pointwise.ce, 4);
            if (s.per_label) out << " mAUC=" << fixed(s.per_label->mauc, 4);
            out << " image-kfold mAUC=" << fixed(s.per_image->mauc, 4) << "\n";
        }
    }
    write_file_text(fs::path(cfg.out) / "predictability.json", predictability_json(summaries));
    return kOk;
}

int cmd_dag_check(const RunConfig& cfg, std::ostream& out) {
    auto claims = builtin_claims();
    if (cfg.inject_wrong) claims.front().expected = !*claims.front().expected;
    const ClaimReport report = verify_claims(claims, builtin_dags());
    bool ok = report.all_pass();

    char line[256];
    std::snprintf(line, sizeof line, "%-20s %-26s %-9s %-12s %s\n", "dag", "claim", "expected", "d-separated",
                  "result");
    out << line;
    for (const auto& r : report.rows) {
        const char* expected = !r.claim.expected ? "-" : (*r.claim.expected ? "true" : "false");
        const char* result = !r.claim.expected ? "INFO" : (r.pass ? "PASS" : "FAIL");
        std::snprintf(line, sizeof line, "%-20s %-26s %-9s %-12s %s\n", r.claim.dag.c_str(),
                      claim_text(r.claim).c_str(), expected, r.separated ? "true" : "false", result);
        out << line;
    }
    out << report.asserted() << " asserted claims, " << (ok ? "all pass" : "FAILURES") << "\n";

    if (cfg.sim_n > 0) {
        const auto scms = builtin_scms();
        const auto base = simulate(scms.at("baseline_sim"), cfg.sim_n, cfg.seed);
        const auto ace = ace_estimate(base);
        const auto base_auc = within_stratum_auc(base);
        const bool base_ok = std::abs(ace.ace) < 0.005 && std::abs(base_auc.value - 0.5) <= 0.01;
        out << "baseline_sim n=" << cfg.sim_n << ": ACE=" << fixed(ace.ace, 5) << " (|ACE| < 0.005)"
            << " within-stratum AUC=" << fixed(base_auc.value, 4) << " (0.5 +/- 0.01) strata=" << ace.strata_used
            << " dropped=" << ace.strata_dropped << " " << (base_ok ? "PASS" : "FAIL") << "\n";

        const auto shared = simulate(scms.at("shared_z_sim"), cfg.sim_n, cfg.seed);
        const auto shared_auc = within_stratum_auc(shared);
        const auto shared_ace = ace_estimate(shared);
        const bool shared_ok = shared_auc.value > 0.6;
        out << "shared_z_sim n=" << cfg.sim_n << ": ACE=" << fixed(shared_ace.ace, 5)
            << " within-stratum AUC=" << fixed(shared_auc.value, 4) << " (> 0.6) " << (shared_ok ? "PASS" : "FAIL")
            << "\n";
        ok = ok && base_ok && shared_ok;
    }
    return ok ? kOk : kClaimFailure;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    require(cfg.out, "--out");
    const auto scms = builtin_scms();
    auto it = scms.find(cfg.scm);
    if (it == scms.end()) throw Error(Errc::InvalidArgument, "unknown SCM '" + cfg.scm + "'");
    const auto frame = simulate(it->second, cfg.n, cfg.seed);
    write_frame_csv(cfg.out, frame);
    out << "wrote " << frame.rows << " rows to " << cfg.out << "\n";
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dataset quality auditing: task-guided IQA, predictability and causal checks", "tgiqa"};
    app.set_config("--config", "", "INI file; [subcommand] sections, flags override")->check(CLI::ExistingFile);
    app.require_subcommand(1);
    RunConfig cfg;

    const auto add_seed = [&](CLI::App* c) { c->add_option("--seed", cfg.seed, "Random seed"); };
    const auto add_tables = [&](CLI::App* c) {
        c->add_option("--scores", cfg.scores, "Score CSV");
        c->add_option("--correctness", cfg.correctness, "Correctness CSV");
        c->add_option("--metrics", cfg.metrics, "Metrics (default: all in the score table)")->delimiter(',');
        c->add_option("--models", cfg.models, "Models (default: all in the correctness table)")->delimiter(',');
        c->add_option("--resamples", cfg.resamples, "Bootstrap resamples");
    };
    const auto add_policy = [&](CLI::App* c) {
        c->add_option("--severities", cfg.severities, "Comma-separated severity set");
        c->add_option("--corruptions", cfg.corruptions, "Comma-separated corruption kinds (default: all)");
        c->add_option("--p-c", cfg.p_c, "Corruption probability");
    };

    auto* score = app.add_subcommand("score", "Compute quality scores into one score CSV");
    score->add_option("--manifest", cfg.manifest, "Manifest JSONL");
    score->add_option("--images", cfg.images, "Image root (default: manifest directory)");
    score->add_option("--metrics", cfg.metrics, "tv, tg, zsclip")->delimiter(',');
    score->add_option("--logits", cfg.logits, "Logits NPY (n x K)");
    score->add_option("--embeddings", cfg.embeddings, "Image embeddings NPY (n x d)");
    score->add_option("--text-weights", cfg.text_weights, "Class prompt embeddings NPY (K x d)");
    score->add_option("--temperature", cfg.temperature, "Zero-shot softmax temperature");
    score->add_option("--ingest", cfg.ingest, "External score CSVs to merge");
    score->add_option("--derive-correctness", cfg.derive_model, "Model name for correctness derived from --logits");
    score->add_option("--correctness-out", cfg.correctness_out, "Where to write derived correctness");
    score->add_option("--out", cfg.out, "Output score CSV");

    auto* mixture = app.add_subcommand("mixture", "Build clean/corrupted mixture manifests, optionally AUC vs p_c");
    mixture->add_option("--manifest", cfg.manifest, "Clean manifest JSONL");
    add_policy(mixture);
    mixture->add_option("--n-min", cfg.n_min, "Sweep start (p_c = N/100)");
    mixture->add_option("--n-max", cfg.n_max, "Sweep end");
    add_tables(mixture);
    add_seed(mixture);
    mixture->add_option("--out", cfg.out, "Output directory");

    auto* corrupt = app.add_subcommand("corrupt", "Write corrupted PNM variants for a mixture");
    corrupt->add_option("--manifest", cfg.manifest, "Clean manifest JSONL");
    corrupt->add_option("--images", cfg.images, "Image root (default: manifest directory)");
    add_policy(corrupt);
    add_seed(corrupt);
    corrupt->add_option("--out", cfg.out, "Output directory");

    auto* report = app.add_subcommand("report", "Correlation CSV, predictability JSON and scatter plots");
    add_tables(report);
    report->add_option("--manifest", cfg.manifest, "Manifest with labels (enables per-label mAUC)");
    report->add_option("--permutations", cfg.permutations, "Permutations per p-value");
    report->add_option("--folds", cfg.folds, "Folds for per-label fits");
    add_seed(report);
    report->add_option("--out", cfg.out, "Output directory");

    auto* predict = app.add_subcommand("predict", "Point-wise, per-label and per-image predictability");
    add_tables(predict);
    predict->add_option("--manifest", cfg.manifest, "Manifest with labels (enables per-label mAUC)");
    predict->add_option("--folds", cfg.folds, "Cross-validation folds");
    add_seed(predict);
    predict->add_option("--out", cfg.out, "Output directory");

    auto* dag = app.add_subcommand("dag", "Causal graph checks");
    dag->require_subcommand(1);
    auto* check = dag->add_subcommand("check", "Evaluate the claim table and the simulated models");
    check->add_option("--sim-n", cfg.sim_n, "Rows per simulated model (0 skips simulation)");
    check->add_flag("--inject-wrong", cfg.inject_wrong, "Flip the first expectation (self-test)");
    add_seed(check);

    auto* simulate_cmd = app.add_subcommand("simulate", "Sample a built-in SCM to CSV");
    simulate_cmd->add_option("--scm", cfg.scm, "baseline_sim or shared_z_sim");
    simulate_cmd->add_option("--n", cfg.n, "Rows");
    add_seed(simulate_cmd);
    simulate_cmd->add_option("--out", cfg.out, "Output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*score) return cmd_score(cfg, out);
        if (*mixture) return cmd_mixture(cfg, out);
        if (*corrupt) return cmd_corrupt(cfg, out);
        if (*report) return cmd_report(cfg, out);
        if (*predict) return cmd_predict(cfg, out);
        if (*check) return cmd_dag_check(cfg, out);
        if (*simulate_cmd) return cmd_simulate(cfg, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    }
    return kUsage;
}

}  // namespace tgiqa::cli
