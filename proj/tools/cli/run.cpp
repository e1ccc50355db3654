#include "cli/run.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "cli/run_config.hpp"
#include "cli/selfcheck.hpp"
#include "conceptforge/corpus.hpp"
#include "conceptforge/dictionary_io.hpp"
#include "conceptforge/error.hpp"
#include "conceptforge/layer.hpp"
#include "conceptforge/parallel.hpp"
#include "conceptforge/report.hpp"
#include "conceptforge/visualize.hpp"

namespace conceptforge::cli {

namespace fs = std::filesystem;

namespace {

/// "--nms-radius" -> "CONCEPTFORGE_NMS_RADIUS"
std::string env_name(std::string_view flag) {
  std::string name = "CONCEPTFORGE_";
  for (char c : flag.substr(2)) {
    name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return name;
}

template <typename T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& target, const std::string& help) {
  return app->add_option(name, target, help)->envname(env_name(name));
}

CLI::Option* toggle(CLI::App* app, const std::string& name, bool& target, const std::string& help) {
  return app->add_flag(name, target, help)->envname(env_name(name));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

/// `# key=value` lines at the top of a detection file.
KeyValues read_header(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line) && line.rfind("# ", 0) == 0) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
  }
  return kv;
}

std::optional<std::string> header_value(const KeyValues& kv, std::string_view key) {
  for (const auto& [k, v] : kv) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::vector<uint32_t> parse_id_list(const std::string& text) {
  std::vector<uint32_t> ids;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      ids.push_back(static_cast<uint32_t>(std::stoul(item)));
    } catch (const std::exception&) {
      throw DataError("bad id list entry '" + item + "'");
    }
  }
  return ids;
}

std::optional<MergeMap> resolve_merge_map(const std::string& spec) {
  if (spec.empty()) return std::nullopt;
  if (auto builtin = MergeMap::builtin(spec)) return builtin;
  return MergeMap::load(spec);
}

std::string object_class_of(const Corpus& corpus) {
  return corpus.tensors.empty() ? std::string() : corpus.tensors.front().meta().object_class;
}

struct Extras {
  // synth
  uint32_t images = 200;
  uint32_t concepts = 16;
  uint32_t placements = 4;
  double noise_sigma = 0.05;
  // cluster
  uint32_t samples_per_image = 100;
  // detect / eval / viz
  std::string dictionary;
  std::string detections;
  std::string filters;
  bool sf_l2 = false;
  std::string ap_mode = "continuous";
  std::string merge_map;
  uint32_t concept_id = 0;
  uint32_t top = 50;
  uint32_t random = 0;
  uint32_t columns = 10;
  std::string images_dir;
  std::string matrix;
};

int do_synth(RunConfig& cfg, const Extras& x, std::ostream& out) {
  SyntheticSpec spec;
  spec.n_images = x.images;
  spec.n_planted_concepts = x.concepts;
  spec.placements_per_image = x.placements;
  spec.noise_sigma = x.noise_sigma;
  spec.layer = vgg16_layer(cfg.layer);
  spec.channels = spec.layer.channels;
  if (!cfg.object_class.empty()) spec.object_class = cfg.object_class;
  const auto corpus = generate_synthetic_corpus(spec, cfg.seed);

  const fs::path dir = cfg.out;
  write_corpus(dir, corpus.tensors, corpus.ground_truth);
  ConceptDictionary planted;
  planted.object_class = spec.object_class;
  planted.layer = spec.layer;
  planted.provenance.seed = cfg.seed;
  for (uint32_t i = 0; i < corpus.planted_centroids.size(); ++i) {
    planted.concepts.push_back({i, corpus.planted_centroids[i], 0});
  }
  planted.extra = cfg.artifact_pairs();
  write_dictionary_file(planted, dir / "planted.vcdc");
  write_provenance(dir, cfg,
                   {{"images", std::to_string(x.images)},
                    {"concepts", std::to_string(x.concepts)},
                    {"placements", std::to_string(x.placements)},
                    {"noise_sigma", format_number(x.noise_sigma)}});
  out << "wrote " << corpus.tensors.size() << " feature files and " << corpus.ground_truth.size()
      << " annotations to " << dir.string() << "\n";
  return kExitOk;
}

int do_cluster(RunConfig& cfg, const Extras& x, std::ostream& out) {
  const auto corpus = load_corpus(cfg.corpus, cfg.layer);
  if (corpus.tensors.empty()) throw DataError("no " + cfg.layer + " feature files in " + cfg.corpus);
  if (cfg.object_class.empty()) cfg.object_class = object_class_of(corpus);
  LearnOptions opts;
  opts.k = cfg.k.value_or(0);
  opts.seed = cfg.seed;
  opts.samples_per_image = x.samples_per_image;
  opts.lloyd.threads = cfg.threads;
  opts.object_class = cfg.object_class;
  auto dict = learn_dictionary(corpus.tensors, vgg16_layer(cfg.layer), opts);
  dict.extra = cfg.artifact_pairs();
  dict.extra.emplace_back("config.samples_per_image", std::to_string(x.samples_per_image));
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  write_dictionary_file(dict, dir / "dictionary.vcdc");
  write_provenance(dir, cfg, {{"samples_per_image", std::to_string(x.samples_per_image)}});
  out << "learned " << dict.concepts.size() << " concepts from " << dict.provenance.n_samples
      << " samples\n";
  return kExitOk;
}

int do_merge(RunConfig& cfg, const Extras& x, std::ostream& out) {
  const auto dict = read_dictionary_file(x.dictionary);
  auto merged = merge_dictionary(dict, cfg.merge_threshold);
  cfg.layer = dict.layer.name;
  // Keep the clustering configuration, then record this step.
  std::erase_if(merged.extra, [](const auto& kv) { return kv.first == "run_config"; });
  merged.extra.emplace_back("merge.dictionary", fs::path(x.dictionary).filename().string());
  merged.extra.emplace_back("merge.threshold", format_number(cfg.merge_threshold));
  merged.extra.emplace_back("run_config", kProvenanceFileName);
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  write_dictionary_file(merged, dir / "merged.vcdc");
  write_provenance(dir, cfg, {{"dictionary", x.dictionary}});
  out << "merged " << dict.concepts.size() << " -> " << merged.concepts.size() << " concepts\n";
  return kExitOk;
}

int do_detect(RunConfig& cfg, const Extras& x, bool layer_given, std::ostream& out) {
  std::optional<ConceptDictionary> dict;
  if (!x.dictionary.empty()) {
    dict = read_dictionary_file(x.dictionary);
    if (layer_given && cfg.layer != dict->layer.name) {
      throw DataError("--layer " + cfg.layer + " but the dictionary was learned on " +
                      dict->layer.name);
    }
    cfg.layer = dict->layer.name;
  }
  const auto corpus = load_corpus(cfg.corpus, cfg.layer);
  const auto& layer = vgg16_layer(cfg.layer);
  DetectOptions opts;
  opts.nms_radius = cfg.nms_radius.value_or(0.0);
  opts.threads = cfg.threads;

  std::vector<uint32_t> ids;
  std::vector<std::vector<Detection>> per_concept;
  KeyValues header = cfg.artifact_pairs();
  if (dict) {
    per_concept = detect_all(*dict, corpus.tensors, opts);
    for (const auto& vc : dict->concepts) ids.push_back(vc.id);
    header.emplace_back("detector", "visual_concept");
    header.emplace_back("dictionary", fs::path(x.dictionary).filename().string());
  } else {
    if (x.filters == "all") {
      for (uint32_t c = 0; c < layer.channels; ++c) ids.push_back(c);
    } else {
      ids = parse_id_list(x.filters);
    }
    if (ids.empty()) throw DataError("--filters selects no channels");
    per_concept.resize(ids.size());
    parallel_for(ids.size(), cfg.threads, [&](std::size_t i) {
      per_concept[i] = single_filter_detect(ids[i], corpus.tensors, layer, {opts.nms_radius, 1},
                                            x.sf_l2);
    });
    header.emplace_back("detector", x.sf_l2 ? "single_filter_l2" : "single_filter");
  }
  header.emplace_back("concept_ids", join_ids(ids));
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  const auto all = flatten(per_concept);
  write_detections(all, dir / "detections.txt", header);
  write_provenance(dir, cfg, {{"dictionary", x.dictionary}, {"filters", x.filters}});
  out << "wrote " << all.size() << " detections for " << ids.size() << " detectors\n";
  return kExitOk;
}

int do_eval(RunConfig& cfg, const Extras& x, bool layer_given, std::ostream& out) {
  const auto text = read_text(x.detections);
  const auto header = read_header(text);
  const auto detections = parse_detections(text);
  if (!layer_given) {
    if (auto layer = header_value(header, "config.layer")) cfg.layer = *layer;
  }
  const auto merge = resolve_merge_map(x.merge_map);
  const auto corpus = load_corpus(cfg.corpus, cfg.layer, merge ? &*merge : nullptr);
  if (corpus.annotations.empty()) throw DataError("no annotations in " + cfg.corpus);
  const auto known = corpus.image_ids();
  if (const auto missing = missing_annotation_images(corpus.annotations, known); !missing.empty()) {
    throw DataError(std::to_string(missing.size()) + " annotated images have no " + cfg.layer +
                    " feature file, first: " + missing.front());
  }

  std::vector<uint32_t> ids;
  if (auto listed = header_value(header, "concept_ids")) {
    ids = parse_id_list(*listed);
  } else {
    for (const auto& d : detections) ids.push_back(d.concept_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  std::map<uint32_t, std::size_t> slot;
  for (std::size_t i = 0; i < ids.size(); ++i) slot[ids[i]] = i;
  std::vector<std::vector<Detection>> per_concept(ids.size());
  for (const auto& d : detections) {
    auto it = slot.find(d.concept_id);
    if (it == slot.end()) throw DataError("detection of unlisted concept " + std::to_string(d.concept_id));
    per_concept[it->second].push_back(d);
  }
  for (auto& list : per_concept) sort_by_rank(list);

  std::unordered_map<std::string, Viewpoint> viewpoints;
  for (const auto& t : corpus.tensors) {
    if (t.meta().viewpoint != Viewpoint::unknown) viewpoints.emplace(t.image_id(), t.meta().viewpoint);
  }
  EvalOptions opts;
  opts.match_radius = cfg.match_radius;
  opts.subset_max = cfg.subset_max;
  opts.mode = parse_ap_mode(x.ap_mode);
  opts.threads = cfg.threads;
  auto report = evaluate(per_concept, ids, corpus.annotations, viewpoints, opts);
  report.provenance = cfg.artifact_pairs();
  report.provenance.emplace_back("detections", fs::path(x.detections).filename().string());
  if (auto det = header_value(header, "detector")) report.provenance.emplace_back("detector", *det);

  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  write_text(dir / "report.txt", format_report_text(report));
  write_text(dir / "ap_matrix.txt", format_ap_matrix(report));
  write_provenance(dir, cfg, {{"detections", x.detections}, {"ap_mode", x.ap_mode}});
  out << format_report_text(report);
  return kExitOk;
}

int do_viz(RunConfig& cfg, const Extras& x, std::ostream& out) {
  const auto dict = read_dictionary_file(x.dictionary);
  const auto* vc = dict.find(x.concept_id);
  if (!vc) throw DataError("no concept " + std::to_string(x.concept_id) + " in " + x.dictionary);
  cfg.layer = dict.layer.name;
  const auto corpus = load_corpus(cfg.corpus, cfg.layer);
  const auto picked = x.random > 0 ? random_top_patches(*vc, corpus.tensors, x.random, x.top, cfg.seed)
                                   : top_patches(*vc, corpus.tensors, x.top);

  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  const std::string stem = "concept_" + std::to_string(vc->id);
  std::string listing;
  for (const auto& [k, v] : cfg.artifact_pairs()) listing += "# " + k + "=" + v + "\n";
  if (picked.truncated) listing += "# truncated=true\n";
  char line[256];
  for (const auto& p : picked.patches) {
    std::snprintf(line, sizeof line, "%zu %s %u %u %d %d %d %d %.9g\n", p.rank, p.image_id.c_str(),
                  p.grid_pos.row, p.grid_pos.col, p.field.x, p.field.y, p.field.width,
                  p.field.height, p.distance);
    listing += line;
  }
  write_text(dir / (stem + "_patches.txt"), listing);

  KeyValues extra = {{"concept", std::to_string(vc->id)}, {"patches", std::to_string(picked.patches.size())}};
  if (!x.images_dir.empty()) {
    const auto store = directory_image_store(x.images_dir);
    const auto average = average_intensity_map(picked.patches, store, dict.layer.rf_size);
    if (average.used > 0) write_ppm(average.mean, dir / (stem + "_average.ppm"));
    write_ppm(montage(picked.patches, store, dict.layer.rf_size, x.columns),
              dir / (stem + "_montage.ppm"));
    extra.emplace_back("patches_used", std::to_string(average.used));
    extra.emplace_back("patches_skipped", std::to_string(average.skipped));
    out << "averaged " << average.used << " patches, skipped " << average.skipped << "\n";
  }
  write_provenance(dir, cfg, extra);
  out << "listed " << picked.patches.size() << " patches for concept " << vc->id << "\n";
  return kExitOk;
}

int do_report(RunConfig& cfg, const Extras& x, std::ostream& out) {
  const fs::path dir = cfg.out;
  const fs::path matrix = x.matrix.empty() ? dir / "ap_matrix.txt" : fs::path(x.matrix);
  const auto report = parse_ap_matrix(read_text(matrix));
  fs::create_directories(dir);
  const auto text = format_report_text(report);
  write_text(dir / "report.txt", text);
  out << text;
  return kExitOk;
}

int do_selfcheck(RunConfig& cfg, std::ostream& out) {
  SelfcheckOptions opts;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  if (cfg.k) opts.k = *cfg.k;
  const auto result = run_selfcheck(opts);
  if (!cfg.out.empty()) {
    cfg.k = opts.k;
    cfg.merge_threshold = opts.merge_threshold;
    cfg.object_class = opts.spec.object_class;
    write_selfcheck_artifacts(result, cfg.out, cfg.artifact_pairs());
    write_provenance(cfg.out, cfg);
  }
  out << format_selfcheck_summary(result);
  return result.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visual concept learning and part-detection evaluation on CNN feature corpora",
               "conceptforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "conceptforge 0.1.0");

  RunConfig cfg;
  cfg.threads = default_thread_count();
  Extras x;
  const std::vector<std::string> layers = {"pool3", "pool4", "pool5"};

  auto add_threads = [&](CLI::App* sub) {
    flag(sub, "--threads", cfg.threads, "Worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
  };
  auto add_layer = [&](CLI::App* sub) {
    return flag(sub, "--layer", cfg.layer, "Feature layer")->check(CLI::IsMember(layers));
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with planted concepts");
  flag(synth, "--out", cfg.out, "Output directory")->required();
  flag(synth, "--seed", cfg.seed, "Random seed");
  add_layer(synth);
  flag(synth, "--class", cfg.object_class, "Object class recorded in the metadata");
  flag(synth, "--images", x.images, "Number of images")->check(CLI::PositiveNumber);
  flag(synth, "--concepts", x.concepts, "Planted concepts")->check(CLI::PositiveNumber);
  flag(synth, "--placements", x.placements, "Planted concepts per image")->check(CLI::PositiveNumber);
  flag(synth, "--noise-sigma", x.noise_sigma, "Noise added to planted responses")
      ->check(CLI::NonNegativeNumber);

  auto* cluster = app.add_subcommand("cluster", "Learn a visual concept dictionary");
  flag(cluster, "--corpus", cfg.corpus, "Corpus directory")->required();
  flag(cluster, "--out", cfg.out, "Output directory")->required();
  add_layer(cluster);
  flag(cluster, "--k", cfg.k, "Number of clusters (default: channel count)")
      ->check(CLI::PositiveNumber);
  flag(cluster, "--seed", cfg.seed, "Random seed");
  flag(cluster, "--samples-per-image", x.samples_per_image, "Grid cells sampled per image")
      ->check(CLI::PositiveNumber);
  flag(cluster, "--class", cfg.object_class, "Object class (default: from the corpus)");
  add_threads(cluster);

  auto* merge = app.add_subcommand("merge", "Merge near-duplicate concepts");
  flag(merge, "--dictionary", x.dictionary, "Dictionary file")->required();
  flag(merge, "--out", cfg.out, "Output directory")->required();
  flag(merge, "--merge-threshold", cfg.merge_threshold, "Cosine similarity threshold")
      ->check(CLI::Range(std::numeric_limits<double>::min(), 1.0));

  auto* detect = app.add_subcommand("detect", "Score, suppress and rank detections");
  flag(detect, "--corpus", cfg.corpus, "Corpus directory")->required();
  flag(detect, "--out", cfg.out, "Output directory")->required();
  auto* dict_opt = flag(detect, "--dictionary", x.dictionary, "Dictionary file");
  auto* filters_opt =
      flag(detect, "--filters", x.filters, "Single-filter baseline: channel list or 'all'");
  dict_opt->excludes(filters_opt);
  toggle(detect, "--sf-l2", x.sf_l2, "Normalize responses before single-filter scoring")
      ->needs(filters_opt);
  auto* detect_layer = add_layer(detect);
  flag(detect, "--nms-radius", cfg.nms_radius, "Suppression radius in pixels (default: 2*stride)")
      ->check(CLI::PositiveNumber);
  add_threads(detect);

  auto* eval = app.add_subcommand("eval", "Evaluate detections against part annotations");
  flag(eval, "--corpus", cfg.corpus, "Corpus directory with annotations.txt")->required();
  flag(eval, "--detections", x.detections, "Detection file")->required();
  flag(eval, "--out", cfg.out, "Output directory")->required();
  auto* eval_layer = add_layer(eval);
  flag(eval, "--match-radius", cfg.match_radius, "Matching radius in pixels")
      ->check(CLI::PositiveNumber);
  flag(eval, "--subset-max", cfg.subset_max, "Largest part subset")->check(CLI::PositiveNumber);
  flag(eval, "--ap-mode", x.ap_mode, "continuous or voc11")
      ->check(CLI::IsMember({"continuous", "voc11"}));
  flag(eval, "--merge-map", x.merge_map, "Label merge map: file, 'car' or 'motorbike'");
  add_threads(eval);

  auto* viz = app.add_subcommand("viz", "Top patches, average map and montage of a concept");
  flag(viz, "--corpus", cfg.corpus, "Corpus directory")->required();
  flag(viz, "--dictionary", x.dictionary, "Dictionary file")->required();
  flag(viz, "--concept", x.concept_id, "Concept id")->required();
  flag(viz, "--out", cfg.out, "Output directory")->required();
  flag(viz, "--top", x.top, "Patches to rank")->check(CLI::PositiveNumber);
  flag(viz, "--random", x.random, "Draw this many patches at random from the top ones");
  flag(viz, "--columns", x.columns, "Montage columns")->check(CLI::PositiveNumber);
  flag(viz, "--images", x.images_dir, "Directory of <image_id>.ppm crops");
  flag(viz, "--seed", cfg.seed, "Random seed for --random");

  auto* report = app.add_subcommand("report", "Re-render report.txt from ap_matrix.txt");
  flag(report, "--out", cfg.out, "Directory holding ap_matrix.txt")->required();
  flag(report, "--matrix", x.matrix, "Matrix file (default: <out>/ap_matrix.txt)");

  auto* selfcheck = app.add_subcommand("selfcheck", "Run the synthetic end-to-end check");
  flag(selfcheck, "--seed", cfg.seed, "Random seed");
  flag(selfcheck, "--k", cfg.k, "Number of clusters (default 64)")->check(CLI::PositiveNumber);
  flag(selfcheck, "--out", cfg.out, "Directory for the artifacts (optional)");
  add_threads(selfcheck);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  auto* chosen = app.get_subcommands().front();
  cfg.subcommand = chosen->get_name();
  try {
    if (chosen == synth) return do_synth(cfg, x, out);
    if (chosen == cluster) return do_cluster(cfg, x, out);
    if (chosen == merge) return do_merge(cfg, x, out);
    if (chosen == detect) {
      if (x.dictionary.empty() && x.filters.empty()) {
        err << "error: detect needs --dictionary or --filters\n\n" << detect->help();
        return kExitUsage;
      }
      return do_detect(cfg, x, !detect_layer->empty(), out);
    }
    if (chosen == eval) return do_eval(cfg, x, !eval_layer->empty(), out);
    if (chosen == viz) return do_viz(cfg, x, out);
    if (chosen == report) return do_report(cfg, x, out);
    return do_selfcheck(cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitFailure;
}

}  // namespace conceptforge::cli
