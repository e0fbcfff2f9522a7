#ifndef TRACKDIFF_PIPELINE_HPP_
#define TRACKDIFF_PIPELINE_HPP_

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trackdiff/diff.hpp"
#include "trackdiff/entropy.hpp"
#include "trackdiff/errors.hpp"
#include "trackdiff/features.hpp"
#include "trackdiff/filter_rules.hpp"
#include "trackdiff/gbdt.hpp"
#include "trackdiff/trace.hpp"

namespace trackdiff {

namespace fs = std::filesystem;

enum class Decision { non_tracker, tracker, mixed_candidate, tracking_field, unresolved_mixed_field };

inline const char* to_string(Decision d) {
    switch (d) {
        case Decision::non_tracker: return "non_tracker";
        case Decision::tracker: return "tracker";
        case Decision::mixed_candidate: return "mixed_candidate";
        case Decision::tracking_field: return "tracking_field";
        case Decision::unresolved_mixed_field: return "unresolved_mixed_field";
    }
    return "?";
}

inline Decision decision_from_string(const std::string& s) {
    for (Decision d : {Decision::non_tracker, Decision::tracker, Decision::mixed_candidate,
                       Decision::tracking_field, Decision::unresolved_mixed_field})
        if (s == to_string(d)) return d;
    throw Error("unknown decision: " + s);
}

struct Verdict {
    std::string target_id;
    TargetRef target;
    double tracker_prob = 0.0;
    double breakage_prob = 0.0;
    Decision decision = Decision::non_tracker;
    std::optional<FilterRule> emitted_rule;
    bool low_confidence = false;
};

struct Models {
    Model tracking;
    Model breakage;
    Model mixed;
};

inline Models load_models(const fs::path& dir) {
    Models m;
    m.tracking = load_model(dir / "tracking.json");
    m.breakage = load_model(dir / "breakage.json");
    m.mixed = load_model(dir / "mixed.json");
    return m;
}

inline void save_models(const Models& m, const fs::path& dir) {
    fs::create_directories(dir);
    save_model(m.tracking, dir / "tracking.json");
    save_model(m.breakage, dir / "breakage.json");
    save_model(m.mixed, dir / "mixed.json");
}

// Analysis parameters for one job directory.
struct JobSpec {
    fs::path job_dir;
    int k = 3;
    double tracker_threshold = 0.5;
    double breakage_threshold = 0.5;
    DiffConfig diff_config;
    FeatureConfig feature_config;
    // Agreement below this marks the verdict low-confidence instead of guessing.
    double confidence_floor = 0.5;
};

struct JobTarget {
    std::string id;
    TargetRef ref;
};

// ---------------------------------------------------------------------------
// Job directory layout:
//   <job>/targets.json
//   <job>/vanilla/run_<i>/trace.json
//   <job>/blocked/<target_id>/run_<i>/trace.json

inline fs::path vanilla_run_dir(const fs::path& job, int run) {
    return job / "vanilla" / ("run_" + std::to_string(run));
}
inline fs::path blocked_run_dir(const fs::path& job, const std::string& target_id, int run) {
    return job / "blocked" / target_id / ("run_" + std::to_string(run));
}

inline std::vector<Trace> load_vanilla_runs(const JobSpec& job) {
    std::vector<Trace> runs;
    for (int i = 0; i < job.k; ++i) {
        fs::path path = vanilla_run_dir(job.job_dir, i) / "trace.json";
        if (!fs::exists(path))
            throw MissingRuns("missing vanilla run " + std::to_string(i) + " in " +
                              job.job_dir.string());
        runs.push_back(load_trace(path));
    }
    return runs;
}

inline std::vector<Trace> load_blocked_runs(const JobSpec& job, const std::string& target_id) {
    std::vector<Trace> runs;
    for (int i = 0; i < job.k; ++i) {
        fs::path path = blocked_run_dir(job.job_dir, target_id, i) / "trace.json";
        if (!fs::exists(path))
            throw MissingRuns("missing blocked run " + std::to_string(i) + " for target " +
                              target_id + " in " + job.job_dir.string());
        runs.push_back(load_trace(path));
    }
    return runs;
}

inline json targets_to_json(const std::vector<JobTarget>& targets, const std::string& mode,
                            int site_rank = -1) {
    json out;
    out["schema_version"] = 1;
    out["mode"] = mode;
    if (site_rank >= 0) out["site_rank"] = site_rank;
    out["targets"] = json::array();
    for (const JobTarget& t : targets) {
        json tj = to_json(t.ref);
        tj["id"] = t.id;
        out["targets"].push_back(std::move(tj));
    }
    return out;
}

struct TargetsFile {
    std::vector<JobTarget> targets;
    std::string mode;
    int site_rank = -1;
};

inline TargetsFile load_targets(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(path.string() + ": cannot open targets file");
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    TargetsFile out;
    out.mode = root.value("mode", "request");
    out.site_rank = root.value("site_rank", -1);
    for (const json& tj : root.value("targets", json::array())) {
        JobTarget t;
        t.id = tj.at("id").get<std::string>();
        t.ref = target_from_json(tj, "$.targets[]");
        out.targets.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Candidate enumeration

enum class CandidateMode { request, field };

struct CandidateOptions {
    CandidateMode mode = CandidateMode::request;
    EntropyThresholds entropy;
    // Drop targets absent from half or more of the vanilla runs
    // (probabilistic or tracker-dependent requests).
    bool drop_unstable = true;
    // When set, only expand fields of requests with these URLs
    // (mixed candidates handed over from request-level detection).
    std::optional<std::set<std::string>> only_urls;
};

inline std::vector<JobTarget> enumerate_candidates(const std::vector<Trace>& vanilla_runs,
                                                   const CandidateOptions& opts = {}) {
    if (vanilla_runs.empty()) return {};
    const Trace& first = vanilla_runs.front();

    auto stable = [&](const TargetRef& ref) {
        if (!opts.drop_unstable) return true;
        int absent = 0;
        for (const Trace& run : vanilla_runs)
            absent += find_target_request(run, ref) == nullptr;
        return absent * 2 < static_cast<int>(vanilla_runs.size());
    };

    std::vector<JobTarget> out;
    int counter = 0;
    if (opts.mode == CandidateMode::request) {
        for (const RequestRecord& r : enumerate_requests(first)) {
            TargetRef ref{TargetKind::request, r.url, std::nullopt};
            if (!stable(ref)) continue;
            char id[16];
            std::snprintf(id, sizeof(id), "t%04d", ++counter);
            out.push_back({id, std::move(ref)});
        }
        return out;
    }

    std::vector<RequestRecord> outgoing;
    for (const RequestRecord& r : first.requests)
        if (r.direction == Direction::outgoing &&
            (!opts.only_urls || opts.only_urls->contains(r.url)))
            outgoing.push_back(r);
    for (const SelectedField& s : select_fields(outgoing, opts.entropy)) {
        TargetRef ref{TargetKind::field, s.request.url, s.field};
        if (!stable(ref)) continue;
        char id[16];
        std::snprintf(id, sizeof(id), "f%04d", ++counter);
        out.push_back({id, std::move(ref)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Detection

inline ConsensusDiff consensus_for_target(const JobSpec& job, const JobTarget& target,
                                          const std::vector<Trace>& vanilla,
                                          const std::vector<Trace>& blocked) {
    for (const Trace& b : blocked) {
        if (!b.meta.blocked_target || !(*b.meta.blocked_target == target.ref))
            throw PairingMismatch("blocked run does not declare target " + target.id);
    }
    std::vector<RawDiff> diffs;
    diffs.reserve(static_cast<std::size_t>(job.k) * static_cast<std::size_t>(job.k));
    for (const Trace& v : vanilla)
        for (const Trace& b : blocked) diffs.push_back(diff_pair(v, b, job.diff_config));
    return consensus(diffs, job.k);
}

namespace detail {

inline Verdict detect_common(const JobSpec& job, const JobTarget& target, const Model& tracker_model,
                             const Model& breakage_model, bool field_mode,
                             const std::vector<Trace>& vanilla) {
    std::vector<Trace> blocked = load_blocked_runs(job, target.id);
    ConsensusDiff diff = consensus_for_target(job, target, vanilla, blocked);

    Verdict v;
    v.target_id = target.id;
    v.target = target.ref;
    v.low_confidence = diff.vote_agreement < job.confidence_floor;

    FeatureVector tracking = tracking_vector(diff, target.ref, job.feature_config);
    v.tracker_prob = predict(tracker_model, tracking);
    // Both probabilities are always reported so threshold sweeps can be
    // re-run offline; the decision itself follows the staged workflow
    // (a below-threshold tracker score ends the analysis as non_tracker).
    FeatureVector breakage = breakage_vector(diff, job.feature_config);
    v.breakage_prob = predict(breakage_model, breakage);

    if (v.tracker_prob <= job.tracker_threshold) {
        v.decision = Decision::non_tracker;
        return v;
    }
    if (v.breakage_prob > job.breakage_threshold) {
        v.decision = field_mode ? Decision::unresolved_mixed_field : Decision::mixed_candidate;
        return v;
    }
    // Tracking and safe to block: emit the fixing rule.
    const RequestRecord* in_vanilla = find_target_request(vanilla.front(), target.ref);
    if (!in_vanilla) throw UnknownTarget("target vanished from vanilla run 0: " + target.id);
    if (field_mode) {
        v.decision = Decision::tracking_field;
        RuleKind kind = target.ref.field->kind == FieldKind::query_param ? RuleKind::removeparam
                                                                         : RuleKind::cookie;
        v.emitted_rule = generate_rule({kind, *in_vanilla, target.ref.field});
    } else {
        v.decision = Decision::tracker;
        v.emitted_rule = generate_rule({RuleKind::block, *in_vanilla, std::nullopt});
    }
    return v;
}

}  // namespace detail

// Request-granularity detection: tracking detector first, breakage
// detector as the veto.
inline Verdict detect_request(const JobSpec& job, const JobTarget& target, const Models& models,
                              const std::vector<Trace>& vanilla) {
    if (target.ref.kind != TargetKind::request)
        throw Error("detect_request needs a request target");
    return detail::detect_common(job, target, models.tracking, models.breakage, false, vanilla);
}

inline Verdict detect_request(const JobSpec& job, const JobTarget& target, const Models& models) {
    return detect_request(job, target, models, load_vanilla_runs(job));
}

// Field-granularity detection for mixed trackers. A field that tracks and
// breaks at the same time violates the one-purpose-per-field assumption
// and stays unresolved (treated as non-tracker downstream).
inline Verdict detect_field(const JobSpec& job, const JobTarget& target, const Models& models,
                            const std::vector<Trace>& vanilla) {
    if (target.ref.kind != TargetKind::field || !target.ref.field)
        throw Error("detect_field needs a field target");
    return detail::detect_common(job, target, models.mixed, models.breakage, true, vanilla);
}

inline Verdict detect_field(const JobSpec& job, const JobTarget& target, const Models& models) {
    return detect_field(job, target, models, load_vanilla_runs(job));
}

// Runs every target in the job's targets.json. Targets are independent;
// they run concurrently and merge in target order, so the output does not
// depend on scheduling.
inline std::vector<Verdict> run_job(const JobSpec& job, const Models& models) {
    TargetsFile targets = load_targets(job.job_dir / "targets.json");
    std::vector<Trace> vanilla = load_vanilla_runs(job);

    std::vector<std::future<Verdict>> futures;
    futures.reserve(targets.targets.size());
    for (const JobTarget& target : targets.targets) {
        futures.push_back(std::async(std::launch::async, [&, target]() {
            return target.ref.kind == TargetKind::request
                       ? detect_request(job, target, models, vanilla)
                       : detect_field(job, target, models, vanilla);
        }));
    }
    std::vector<Verdict> out;
    out.reserve(futures.size());
    for (std::future<Verdict>& f : futures) out.push_back(f.get());
    return out;
}

// ---------------------------------------------------------------------------
// Breakage reconstruction from exception rules

struct BreakageSample {
    FilterRule flipped;
    int blocked_count = 0;
    ConsensusDiff diff;
};

struct DiscardedRule {
    std::string raw;
    std::string reason;
};

struct ReconstructionReport {
    std::vector<BreakageSample> samples;
    std::vector<DiscardedRule> discarded;
};

// Directory key for one rule's blocked runs.
inline std::string rule_slug(const FilterRule& rule) { return "rule-" + fnv1a64_hex(rule.raw); }

inline int count_vanilla_runs(const fs::path& job_dir) {
    int k = 0;
    while (fs::exists(vanilla_run_dir(job_dir, k) / "trace.json")) ++k;
    return k;
}

// Rebuilds breakage samples by flipping exception rules into block rules.
// Every input exception rule ends up either as a sample or in the discard
// report; nothing is dropped silently.
inline ReconstructionReport reconstruct_breakage_samples(const std::vector<fs::path>& list_files,
                                                         const fs::path& jobs_root,
                                                         const DiffConfig& diff_config = {}) {
    RuleSet rules;
    for (const fs::path& file : list_files) rules.append(RuleSet::load(file));

    ReconstructionReport report;
    for (const FilterRule& rule : rules.rules) {
        if (!rule.exception) continue;
        if (rule.options.include_domains.empty()) {
            report.discarded.push_back({rule.raw, "ambiguous target"});
            continue;
        }
        fs::path job_dir = jobs_root / rule.options.include_domains.front();
        if (!fs::exists(job_dir)) {
            report.discarded.push_back({rule.raw, "missing job"});
            continue;
        }
        int k = count_vanilla_runs(job_dir);
        if (k == 0) {
            report.discarded.push_back({rule.raw, "missing job"});
            continue;
        }

        FilterRule flipped = flip_exception(rule);
        RuleSet flipped_set;
        flipped_set.rules = {flipped};

        Trace vanilla0 = load_trace(vanilla_run_dir(job_dir, 0) / "trace.json");
        int blocked_count = 0;
        for (const RequestRecord& r : vanilla0.requests)
            blocked_count += match_request(flipped_set, r, vanilla0.meta.page_url).decision ==
                             MatchDecision::block;
        if (blocked_count == 0) {
            report.discarded.push_back({rule.raw, "no blocked resources"});
            continue;
        }

        std::string slug = rule_slug(flipped);
        bool runs_present = true;
        for (int i = 0; i < k && runs_present; ++i)
            runs_present = fs::exists(blocked_run_dir(job_dir, slug, i) / "trace.json");
        if (!runs_present) {
            report.discarded.push_back({rule.raw, "missing blocked runs"});
            continue;
        }

        std::vector<Trace> vanilla, blocked;
        for (int i = 0; i < k; ++i) {
            vanilla.push_back(load_trace(vanilla_run_dir(job_dir, i) / "trace.json"));
            blocked.push_back(load_trace(blocked_run_dir(job_dir, slug, i) / "trace.json"));
        }
        std::vector<RawDiff> diffs;
        for (const Trace& v : vanilla)
            for (const Trace& b : blocked) diffs.push_back(diff_pair(v, b, diff_config));

        BreakageSample sample;
        sample.flipped = flipped;
        sample.blocked_count = blocked_count;
        sample.diff = consensus(diffs, k);
        report.samples.push_back(std::move(sample));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Training set construction

struct TrainingSets {
    Dataset breakage;
    Dataset tracking;
    Dataset mixed;
    int breakage_positives = 0;
    int breakage_negatives = 0;
    int tracking_positives = 0;
    int tracking_negatives = 0;
    int mixed_positives = 0;
    int mixed_negatives = 0;
    int skipped_unlabeled = 0;
};

struct TrainingOptions {
    int popularity_cutoff = 5000;      // negatives only from jobs ranked at or above this
    std::set<std::string> functional_cookies;  // names treated as functional ground truth
    DiffConfig diff_config;
    FeatureConfig feature_config;
};

inline TrainingSets build_training_sets(const fs::path& jobs_root,
                                        const std::vector<fs::path>& list_files,
                                        const TrainingOptions& opts = {}) {
    RuleSet lists;
    for (const fs::path& file : list_files) lists.append(RuleSet::load(file));

    TrainingSets out;

    // Positive breakage rows come from reconstructed exception rules.
    ReconstructionReport reconstruction =
        reconstruct_breakage_samples(list_files, jobs_root, opts.diff_config);
    for (const BreakageSample& sample : reconstruction.samples) {
        out.breakage.add(breakage_vector(sample.diff, opts.feature_config), 1);
        ++out.breakage_positives;
    }

    std::vector<fs::path> job_dirs;
    for (const fs::directory_entry& entry : fs::directory_iterator(jobs_root))
        if (entry.is_directory() && fs::exists(entry.path() / "targets.json"))
            job_dirs.push_back(entry.path());
    std::sort(job_dirs.begin(), job_dirs.end());

    for (const fs::path& job_dir : job_dirs) {
        TargetsFile targets = load_targets(job_dir / "targets.json");
        int k = count_vanilla_runs(job_dir);
        if (k == 0) continue;

        JobSpec job;
        job.job_dir = job_dir;
        job.k = k;
        job.diff_config = opts.diff_config;
        job.feature_config = opts.feature_config;
        std::vector<Trace> vanilla;
        for (int i = 0; i < k; ++i)
            vanilla.push_back(load_trace(vanilla_run_dir(job_dir, i) / "trace.json"));
        const Trace& vanilla0 = vanilla.front();

        for (const JobTarget& target : targets.targets) {
            bool runs_present = true;
            for (int i = 0; i < k && runs_present; ++i)
                runs_present = fs::exists(blocked_run_dir(job_dir, target.id, i) / "trace.json");
            if (!runs_present) continue;
            const RequestRecord* request = find_target_request(vanilla0, target.ref);
            if (!request) continue;

            std::vector<Trace> blocked = load_blocked_runs(job, target.id);
            ConsensusDiff diff = consensus_for_target(job, target, vanilla, blocked);
            FeatureVector features = tracking_vector(diff, target.ref, opts.feature_config);

            if (target.ref.kind == TargetKind::request) {
                MatchOutcome outcome = match_request(lists, *request, vanilla0.meta.page_url);
                int label = outcome.decision == MatchDecision::block ? 1 : 0;
                out.tracking.add(features, label);
                ++(label ? out.tracking_positives : out.tracking_negatives);
                // List-labeled tracker blocks on popular sites double as
                // breakage negatives: legitimate page changes.
                bool popular = targets.site_rank >= 0 && targets.site_rank <= opts.popularity_cutoff;
                if (label == 1 && popular) {
                    out.breakage.add(breakage_vector(diff, opts.feature_config), 0);
                    ++out.breakage_negatives;
                }
            } else {
                int label;
                bool matched_field_rule = false;
                for (const MatchOutcome& action :
                     field_actions(lists, *request, vanilla0.meta.page_url))
                    matched_field_rule =
                        matched_field_rule || (action.field->kind == target.ref.field->kind &&
                                               action.field->name == target.ref.field->name);
                if (matched_field_rule) {
                    label = 1;
                } else if (target.ref.field->kind == FieldKind::cookie) {
                    if (!opts.functional_cookies.contains(target.ref.field->name)) {
                        ++out.skipped_unlabeled;
                        continue;
                    }
                    label = 0;
                } else {
                    // A parameter of a request the lists leave alone is a
                    // functional-parameter negative.
                    if (match_request(lists, *request, vanilla0.meta.page_url).decision ==
                        MatchDecision::block) {
                        ++out.skipped_unlabeled;
                        continue;
                    }
                    label = 0;
                }
                out.mixed.add(features, label);
                ++(label ? out.mixed_positives : out.mixed_negatives);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int tp = 0, fp = 0, fn = 0, tn = 0;
};

inline bool positive_decision(Decision d) {
    return d == Decision::tracker || d == Decision::tracking_field;
}

inline Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& labels) {
    Metrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        m.tp += predicted[i] == 1 && labels[i] == 1;
        m.fp += predicted[i] == 1 && labels[i] == 0;
        m.fn += predicted[i] == 0 && labels[i] == 1;
        m.tn += predicted[i] == 0 && labels[i] == 0;
    }
    double n = static_cast<double>(labels.size());
    m.accuracy = (m.tp + m.tn) / n;
    m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

inline Metrics evaluate(const std::vector<Verdict>& verdicts, const std::vector<int>& labels) {
    if (verdicts.empty() || verdicts.size() != labels.size())
        throw EmptyEvaluation("need equally many verdicts and labels, got " +
                              std::to_string(verdicts.size()) + " and " +
                              std::to_string(labels.size()));
    std::vector<int> predicted;
    predicted.reserve(verdicts.size());
    for (const Verdict& v : verdicts) predicted.push_back(positive_decision(v.decision) ? 1 : 0);
    return compute_metrics(predicted, labels);
}

struct SweepRow {
    double tracker_threshold;
    double breakage_threshold;
    Metrics metrics;
};

struct SweepResult {
    SweepRow best;
    std::vector<SweepRow> table;
};

// Re-derives decisions from the stored probabilities over a threshold
// grid and reports the accuracy-maximizing pair.
inline SweepResult threshold_sweep(const std::vector<Verdict>& verdicts,
                                   const std::vector<int>& labels, double step = 0.05) {
    if (verdicts.empty() || verdicts.size() != labels.size())
        throw EmptyEvaluation("need equally many verdicts and labels");
    SweepResult out;
    bool first = true;
    for (double tt = step; tt < 1.0; tt += step) {
        for (double tb = step; tb < 1.0; tb += step) {
            std::vector<int> predicted;
            predicted.reserve(verdicts.size());
            for (const Verdict& v : verdicts)
                predicted.push_back(v.tracker_prob > tt && v.breakage_prob <= tb ? 1 : 0);
            SweepRow row{tt, tb, compute_metrics(predicted, labels)};
            if (first || row.metrics.accuracy > out.best.metrics.accuracy) {
                out.best = row;
                first = false;
            }
            out.table.push_back(row);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Verdict TSV: target, tracker_prob, breakage_prob, decision, rule, flags.

inline std::string target_label(const TargetRef& ref) {
    if (ref.kind == TargetKind::field && ref.field)
        return ref.url_pattern + "#" + detail::to_string(ref.field->kind) + ":" + ref.field->name;
    return ref.url_pattern;
}

inline void write_verdicts_tsv(const std::vector<Verdict>& verdicts, std::ostream& out) {
    out << "target\ttracker_prob\tbreakage_prob\tdecision\trule\tflags\n";
    char buf[64];
    for (const Verdict& v : verdicts) {
        out << target_label(v.target) << '\t';
        std::snprintf(buf, sizeof(buf), "%.6f\t%.6f\t", v.tracker_prob, v.breakage_prob);
        out << buf << to_string(v.decision) << '\t'
            << (v.emitted_rule ? emit_rule(*v.emitted_rule) : "-") << '\t'
            << (v.low_confidence ? "low_confidence" : "-") << '\n';
    }
}

inline std::vector<Verdict> read_verdicts_tsv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(path.string() + ": cannot open verdicts file");
    std::vector<Verdict> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split(line, '\t');
        if (cells.size() < 6) throw Error(path.string() + ": malformed verdict row: " + line);
        Verdict v;
        v.target.url_pattern = cells[0];
        std::size_t hash = cells[0].rfind('#');
        if (hash != std::string::npos &&
            (cells[0].find("#query_param:", hash) == hash || cells[0].find("#cookie:", hash) == hash)) {
            v.target.kind = TargetKind::field;
            v.target.url_pattern = cells[0].substr(0, hash);
            std::string rest = cells[0].substr(hash + 1);
            std::size_t colon = rest.find(':');
            v.target.field = RequestField{
                rest.substr(0, colon) == "cookie" ? FieldKind::cookie : FieldKind::query_param,
                rest.substr(colon + 1), ""};
        }
        v.tracker_prob = std::stod(cells[1]);
        v.breakage_prob = std::stod(cells[2]);
        v.decision = decision_from_string(cells[3]);
        if (cells[4] != "-") v.emitted_rule = parse_rule(cells[4]);
        v.low_confidence = cells[5] == "low_confidence";
        out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// External capture integration: expands a user-supplied command template
// per missing blocked run. Placeholders: {url}, {target}, {out}, {run}.

inline std::string expand_capture_template(std::string cmd, const std::string& url,
                                           const std::string& target, const std::string& out_dir,
                                           int run) {
    auto replace_all = [&](const std::string& what, const std::string& with) {
        std::size_t pos = 0;
        while ((pos = cmd.find(what, pos)) != std::string::npos) {
            cmd.replace(pos, what.size(), with);
            pos += with.size();
        }
    };
    replace_all("{url}", url);
    replace_all("{target}", target);
    replace_all("{out}", out_dir);
    replace_all("{run}", std::to_string(run));
    return cmd;
}

inline int capture_missing_runs(const JobSpec& job, const std::vector<JobTarget>& targets,
                                const std::string& page_url, const std::string& cmd_template) {
    int invoked = 0;
    for (const JobTarget& target : targets) {
        for (int run = 0; run < job.k; ++run) {
            fs::path dir = blocked_run_dir(job.job_dir, target.id, run);
            if (fs::exists(dir / "trace.json")) continue;
            fs::create_directories(dir);
            std::string cmd = expand_capture_template(cmd_template, page_url,
                                                      target_label(target.ref), dir.string(), run);
            int rc = std::system(cmd.c_str());
            if (rc != 0) throw Error("capture command failed (" + std::to_string(rc) + "): " + cmd);
            ++invoked;
        }
    }
    return invoked;
}

}  // namespace trackdiff

#endif  // TRACKDIFF_PIPELINE_HPP_
