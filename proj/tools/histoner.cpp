// histoner: pipeline tool for historical-OCR corpora and NER evaluation.
// Subcommands cover corpus filtering and statistics, wordpiece vocabulary
// training, masked-LM pretraining data, NER dataset parsing, strict/fuzzy
// scoring, attribute-aided evaluation, tagger training, and experiment
// orchestration.

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "histoner/attr_eval.hpp"
#include "histoner/config.hpp"
#include "histoner/corpus.hpp"
#include "histoner/errors.hpp"
#include "histoner/harness.hpp"
#include "histoner/io.hpp"
#include "histoner/mlm.hpp"
#include "histoner/ner.hpp"
#include "histoner/scorer.hpp"
#include "histoner/tagger.hpp"
#include "histoner/utf8.hpp"
#include "histoner/wordpiece.hpp"

namespace {

using namespace histoner;
namespace fs = std::filesystem;

struct GlobalOptions {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string output_dir;
  bool quiet = false;
};

GlobalOptions g_opts;

void say(const std::string& message) {
  if (!g_opts.quiet) std::cout << message << '\n';
}

corpus::IngestResult ingest_or_die(const std::string& input, const std::string& format) {
  const corpus::IngestFormat fmt =
      format == "dir" ? corpus::IngestFormat::plaintext_dir : corpus::IngestFormat::jsonl;
  corpus::IngestResult result = corpus::ingest(input, fmt);
  for (const corpus::IngestError& error : result.errors) {
    std::cerr << input << ":" << error.line << ": " << error.message << '\n';
  }
  return result;
}

std::string documents_to_jsonl(const std::vector<corpus::Document>& docs) {
  std::string out;
  for (const corpus::Document& doc : docs) {
    out += corpus::document_to_json(doc);
    out += '\n';
  }
  return out;
}

std::uint64_t parse_scaled(const std::string& text) {
  if (text.empty()) throw UsageError("empty number");
  std::uint64_t scale = 1;
  std::string digits = text;
  switch (digits.back()) {
    case 'K': case 'k': scale = 1000ULL; break;
    case 'M': case 'm': scale = 1000000ULL; break;
    case 'B': case 'b': case 'G': case 'g': scale = 1000000000ULL; break;
    default: break;
  }
  if (scale != 1) digits.pop_back();
  std::size_t pos = 0;
  const std::uint64_t value = std::stoull(digits, &pos);
  if (pos != digits.size()) throw UsageError("cannot parse number '" + text + "'");
  return value * scale;
}

ner::Dataset load_ner(const std::string& path, const std::string& label_column,
                      bool normalize_long_s) {
  if (!fs::exists(path)) throw DataError("input does not exist: " + path);
  return ner::load_dataset(path, label_column, normalize_long_s);
}

wordpiece::Vocab load_vocab(const std::string& path) {
  if (!fs::exists(path)) throw DataError("vocabulary does not exist: " + path);
  return wordpiece::Vocab::load(path);
}

std::vector<harness::LanguageData> load_language_data(const config::ExperimentConfig& cfg) {
  std::vector<harness::LanguageData> languages;
  for (const auto& [language, splits] : cfg.datasets) {
    harness::LanguageData data;
    data.language = language;
    const auto train_it = splits.find("train");
    const auto dev_it = splits.find("dev");
    if (train_it == splits.end() || dev_it == splits.end()) {
      throw DataError("language " + language + " needs both train and dev paths");
    }
    data.train = load_ner(train_it->second, cfg.label_column, cfg.normalize_long_s);
    data.dev = load_ner(dev_it->second, cfg.label_column, cfg.normalize_long_s);
    for (auto& s : data.train) s.language = language;
    for (auto& s : data.dev) s.language = language;
    languages.push_back(std::move(data));
  }
  if (languages.empty()) throw DataError("config names no datasets");
  return languages;
}

std::string format_f1(double f1_fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * f1_fraction);
  return buf;
}

void add_corpus_commands(CLI::App& app) {
  CLI::App* corpus_cmd = app.add_subcommand("corpus", "Corpus filtering and statistics");
  corpus_cmd->require_subcommand(1);

  {
    auto* cmd = corpus_cmd->add_subcommand("filter", "Filter documents by OCR confidence");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto report_path = std::make_shared<std::string>();
    auto format = std::make_shared<std::string>("jsonl");
    auto unit = std::make_shared<std::string>("doc");
    auto threshold = std::make_shared<double>(0.6);
    cmd->add_option("--input", *input, "Input corpus (JSON Lines)")->required();
    cmd->add_option("--output", *output, "Filtered corpus output")->required();
    cmd->add_option("--threshold", *threshold, "Minimum mean word confidence")->required();
    cmd->add_option("--format", *format, "Input format: jsonl or dir")
        ->check(CLI::IsMember({"jsonl", "dir"}));
    cmd->add_option("--unit", *unit, "Filter unit: doc (whole documents) or word")
        ->check(CLI::IsMember({"doc", "word"}));
    cmd->add_option("--report", *report_path, "Write the filter report as JSON");
    cmd->callback([=] {
      corpus::IngestResult ingested = ingest_or_die(*input, *format);
      const corpus::FilterUnit filter_unit =
          *unit == "word" ? corpus::FilterUnit::word : corpus::FilterUnit::document;
      corpus::FilterResult result =
          corpus::filter_by_confidence(ingested.documents, *threshold, filter_unit);
      io::write_file_atomic(*output, documents_to_jsonl(result.documents));
      std::ostringstream summary;
      summary << "kept_bytes=" << result.report.kept_bytes
              << " dropped_bytes=" << result.report.dropped_bytes
              << " unscored_bytes=" << result.report.unscored_bytes
              << " kept_docs=" << result.report.kept_docs
              << " dropped_docs=" << result.report.dropped_docs
              << " unscored_docs=" << result.report.unscored_docs;
      say(summary.str());
      if (!report_path->empty()) {
        nlohmann::ordered_json j;
        j["threshold"] = *threshold;
        j["unit"] = *unit;
        j["input_bytes"] = result.report.input_bytes;
        j["kept_bytes"] = result.report.kept_bytes;
        j["dropped_bytes"] = result.report.dropped_bytes;
        j["unscored_bytes"] = result.report.unscored_bytes;
        j["kept_docs"] = result.report.kept_docs;
        j["dropped_docs"] = result.report.dropped_docs;
        j["unscored_docs"] = result.report.unscored_docs;
        io::write_file_atomic(*report_path, j.dump(2) + "\n");
      }
    });
  }

  {
    auto* cmd = corpus_cmd->add_subcommand("stats", "Characters-per-year histogram");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto format = std::make_shared<std::string>("jsonl");
    cmd->add_option("--input", *input, "Input corpus")->required();
    cmd->add_option("--output", *output, "Histogram CSV (stdout when omitted)");
    cmd->add_option("--format", *format)->check(CLI::IsMember({"jsonl", "dir"}));
    cmd->callback([=] {
      corpus::IngestResult ingested = ingest_or_die(*input, *format);
      const corpus::CorpusStats stats = corpus::chars_per_year(ingested.documents);
      if (output->empty()) {
        std::cout << stats.to_csv();
      } else {
        io::write_file_atomic(*output, stats.to_csv());
      }
      say("docs=" + std::to_string(stats.doc_count) +
          " bytes=" + std::to_string(stats.total_bytes));
    });
  }

  {
    auto* cmd = corpus_cmd->add_subcommand("upsample", "Replicate a corpus to a target size");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto target = std::make_shared<std::string>();
    cmd->add_option("--input", *input)->required();
    cmd->add_option("--output", *output)->required();
    cmd->add_option("--target-bytes", *target, "Target size (suffix K/M/B allowed)")->required();
    cmd->callback([=] {
      corpus::IngestResult ingested = ingest_or_die(*input, "jsonl");
      std::uint64_t corpus_bytes = 0;
      for (const corpus::Document& doc : ingested.documents) corpus_bytes += doc.text_bytes();
      const std::uint64_t factor = corpus::upsample_factor(corpus_bytes, parse_scaled(*target));
      io::write_file_atomic(*output,
                            documents_to_jsonl(corpus::upsample(ingested.documents, factor)));
      say("replication_factor=" + std::to_string(factor));
    });
  }

  {
    auto* cmd = corpus_cmd->add_subcommand("normalize-long-s", "Replace U+017F with 's'");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    cmd->add_option("--input", *input)->required();
    cmd->add_option("--output", *output)->required();
    cmd->callback([=] {
      corpus::IngestResult ingested = ingest_or_die(*input, "jsonl");
      for (corpus::Document& doc : ingested.documents) {
        doc.text = utf8::normalize_long_s(doc.text);
      }
      io::write_file_atomic(*output, documents_to_jsonl(ingested.documents));
    });
  }

  {
    auto* cmd = corpus_cmd->add_subcommand("balance", "Per-language size report");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto ratio = std::make_shared<double>(0.25);
    cmd->add_option("--input", *input)->required();
    cmd->add_option("--output", *output, "Balance CSV (stdout when omitted)");
    cmd->add_option("--ratio", *ratio, "Flag languages deviating from the mean by more");
    cmd->callback([=] {
      corpus::IngestResult ingested = ingest_or_die(*input, "jsonl");
      std::map<std::string, std::uint64_t> per_language;
      for (const corpus::Document& doc : ingested.documents) {
        per_language[doc.language] += doc.text_bytes();
      }
      const corpus::BalanceReport report = corpus::balance_report(per_language, *ratio);
      if (output->empty()) {
        std::cout << report.to_csv();
      } else {
        io::write_file_atomic(*output, report.to_csv());
      }
      for (const corpus::BalanceRow& row : report.rows) {
        if (row.flagged) say("flagged: " + row.language);
      }
    });
  }
}

void add_vocab_commands(CLI::App& app) {
  CLI::App* vocab_cmd =
      app.add_subcommand("vocab", "Wordpiece vocabulary training and diagnostics");
  vocab_cmd->require_subcommand(1);

  {
    auto* cmd = vocab_cmd->add_subcommand("train", "Train a cased wordpiece vocabulary");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto size = std::make_shared<std::size_t>(32000);
    auto min_frequency = std::make_shared<std::uint64_t>(2);
    auto normalize = std::make_shared<bool>(false);
    cmd->add_option("--input", *input, "Training corpus (JSON Lines)")->required();
    cmd->add_option("--output", *output, "Vocabulary file, one token per line")->required();
    cmd->add_option("--size", *size, "Target vocabulary size");
    cmd->add_option("--min-frequency", *min_frequency, "Minimum pair frequency for merges");
    cmd->add_flag("--normalize-long-s", *normalize, "Fold U+017F to 's' before training");
    cmd->callback([=] {
      corpus::IngestResult ingested = ingest_or_die(*input, "jsonl");
      wordpiece::TrainOptions options;
      options.vocab_size = *size;
      options.min_frequency = *min_frequency;
      options.normalize_long_s = *normalize;
      const wordpiece::Vocab vocab = wordpiece::train_vocab(ingested.documents, options);
      std::string content;
      for (const std::string& token : vocab.tokens()) {
        content += token;
        content += '\n';
      }
      io::write_file_atomic(*output, content);
      say("vocab_size=" + std::to_string(vocab.size()));
    });
  }

  {
    auto* cmd = vocab_cmd->add_subcommand("stats", "Subword fertility and UNK portion");
    auto vocab_path = std::make_shared<std::string>();
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto normalize = std::make_shared<bool>(false);
    cmd->add_option("--vocab", *vocab_path)->required();
    cmd->add_option("--input", *input, "Corpus or dataset (JSON Lines)")->required();
    cmd->add_option("--output", *output, "Stats CSV (stdout when omitted)");
    cmd->add_flag("--normalize-long-s", *normalize, "Fold U+017F to 's' before tokenizing");
    cmd->callback([=] {
      const wordpiece::Vocab vocab = load_vocab(*vocab_path);
      wordpiece::Tokenizer tokenizer(vocab);
      tokenizer.normalize_long_s = *normalize;
      corpus::IngestResult ingested = ingest_or_die(*input, "jsonl");
      const wordpiece::StatsReport report =
          wordpiece::tokenizer_stats(ingested.documents, tokenizer);
      if (output->empty()) {
        std::cout << report.to_csv();
      } else {
        io::write_file_atomic(*output, report.to_csv());
      }
    });
  }
}

void add_mlm_commands(CLI::App& app) {
  CLI::App* mlm_cmd = app.add_subcommand("mlm", "Masked-LM pretraining data");
  mlm_cmd->require_subcommand(1);

  {
    auto* cmd = mlm_cmd->add_subcommand("build", "Generate masked pretraining instances");
    auto input = std::make_shared<std::string>();
    auto vocab_path = std::make_shared<std::string>();
    auto seq_len = std::make_shared<std::size_t>(512);
    auto max_preds = std::make_shared<std::size_t>(0);  // 0: 75, or 76 for 64k vocabularies
    auto mlm_prob = std::make_shared<double>(0.15);
    auto dupe = std::make_shared<std::size_t>(5);
    auto short_seq_prob = std::make_shared<double>(0.1);
    auto chunk_bytes = std::make_shared<std::string>("1B");
    auto wwm = std::make_shared<bool>(false);
    cmd->add_option("--input", *input, "Tokenizable corpus (JSON Lines)")->required();
    cmd->add_option("--vocab", *vocab_path)->required();
    cmd->add_option("--seq-len", *seq_len, "Maximum sequence length");
    cmd->add_option("--max-preds", *max_preds,
                    "Maximum predictions per sequence (default 75; 76 for 64k vocabularies)");
    cmd->add_option("--mlm-prob", *mlm_prob, "Masked language probability rate");
    cmd->add_option("--dupe", *dupe, "Duplication factor");
    cmd->add_option("--short-seq-prob", *short_seq_prob);
    cmd->add_option("--chunk-bytes", *chunk_bytes, "Shard size limit (suffix K/M/B allowed)");
    cmd->add_flag("--whole-word-masking", *wwm, "Mask whole words instead of single pieces");
    cmd->callback([=] {
      const wordpiece::Vocab vocab = load_vocab(*vocab_path);
      const wordpiece::Tokenizer tokenizer(vocab);
      corpus::IngestResult ingested = ingest_or_die(*input, "jsonl");
      std::vector<mlm::TokenizedDocument> docs;
      for (const corpus::Document& doc : ingested.documents) {
        mlm::TokenizedDocument tokenized;
        tokenized.id = doc.id;
        tokenized.language = doc.language;
        std::istringstream lines(doc.text);
        std::string line;
        while (std::getline(lines, line)) {
          const std::vector<int> ids = tokenizer.encode(line);
          if (!ids.empty()) tokenized.sentences.push_back(ids);
        }
        if (!tokenized.sentences.empty()) docs.push_back(std::move(tokenized));
      }
      mlm::BuildOptions options;
      options.max_seq_len = *seq_len;
      options.max_predictions = *max_preds ? *max_preds : (vocab.size() >= 64000 ? 76 : 75);
      options.mlm_prob = *mlm_prob;
      options.dupe_factor = *dupe;
      options.short_seq_prob = *short_seq_prob;
      options.whole_word_masking = *wwm;
      options.seed = g_opts.seed;
      const std::vector<mlm::MlmInstance> instances = mlm::build_instances(docs, vocab, options);

      const fs::path out_dir =
          g_opts.output_dir.empty() ? fs::path("mlm-out") : fs::path(g_opts.output_dir);
      // Shards land in a temp dir first; each rename is atomic.
      const fs::path tmp_dir = out_dir / ".tmp-shards";
      std::error_code ec;
      fs::remove_all(tmp_dir, ec);
      const std::vector<fs::path> shards =
          mlm::shard_instances(instances, parse_scaled(*chunk_bytes), tmp_dir);
      fs::create_directories(out_dir);
      for (const fs::path& shard : shards) {
        const fs::path target = out_dir / shard.filename();
        fs::remove(target, ec);
        fs::rename(shard, target);
      }
      fs::remove_all(tmp_dir, ec);
      say("instances=" + std::to_string(instances.size()) +
          " shards=" + std::to_string(shards.size()) + " dir=" + out_dir.string());
    });
  }

  {
    auto* cmd = mlm_cmd->add_subcommand("budget", "Pretraining subtoken arithmetic");
    auto steps = std::make_shared<std::string>();
    auto batch = std::make_shared<std::string>();
    auto seq_len = std::make_shared<std::string>();
    auto corpus_subtokens = std::make_shared<std::string>();
    cmd->add_option("--steps", *steps)->required();
    cmd->add_option("--batch-size", *batch)->required();
    cmd->add_option("--seq-len", *seq_len)->required();
    cmd->add_option("--corpus-subtokens", *corpus_subtokens)->required();
    cmd->callback([=] {
      const mlm::PretrainBudget budget =
          mlm::pretraining_budget(parse_scaled(*steps), parse_scaled(*batch),
                                  parse_scaled(*seq_len), parse_scaled(*corpus_subtokens));
      char line[160];
      std::snprintf(line, sizeof(line), "subtokens_seen=%llu epochs=%.1f",
                    static_cast<unsigned long long>(budget.subtokens_seen),
                    budget.epochs_one_decimal());
      std::cout << line << '\n';
    });
  }
}

void add_parse_command(CLI::App& app) {
  auto* cmd = app.add_subcommand("parse", "Parse NER datasets to canonical JSON Lines");
  auto input = std::make_shared<std::string>();
  auto output = std::make_shared<std::string>();
  auto format = std::make_shared<std::string>("auto");
  auto label_column = std::make_shared<std::string>("NE-COARSE-LIT");
  auto language = std::make_shared<std::string>();
  auto normalize = std::make_shared<bool>(false);
  cmd->add_option("--input", *input)->required();
  cmd->add_option("--output", *output)->required();
  cmd->add_option("--format", *format)->check(CLI::IsMember({"auto", "hipe", "conll"}));
  cmd->add_option("--label-column", *label_column, "HIPE column to read tags from");
  cmd->add_option("--language", *language, "Language tag override");
  cmd->add_flag("--normalize-long-s", *normalize);
  cmd->callback([=] {
    if (!fs::exists(*input)) throw DataError("input does not exist: " + *input);
    ner::Dataset dataset;
    if (*format == "conll") {
      dataset = ner::parse_conll(*input, language->empty() ? "und" : *language, *normalize);
    } else if (*format == "hipe") {
      ner::HipeParseOptions options;
      options.label_column = *label_column;
      options.normalize_long_s = *normalize;
      options.language = *language;
      dataset = ner::parse_hipe_tsv(*input, options);
    } else {
      dataset = ner::load_dataset(*input, *label_column, *normalize);
    }
    if (!language->empty()) {
      for (ner::AnnotatedSentence& s : dataset) s.language = *language;
    }
    std::string content;
    for (const ner::AnnotatedSentence& s : dataset) {
      content += ner::sentence_to_json(s);
      content += '\n';
    }
    io::write_file_atomic(*output, content);
    std::size_t spans = 0;
    std::size_t repairs = 0;
    for (const ner::AnnotatedSentence& s : dataset) {
      const ner::SpanExtraction extraction = ner::spans_from_iob(s);
      spans += extraction.spans.size();
      repairs += extraction.repairs;
    }
    say("sentences=" + std::to_string(dataset.size()) + " entities=" + std::to_string(spans) +
        " repairs=" + std::to_string(repairs));
  });
}

void add_score_command(CLI::App& app) {
  auto* cmd = app.add_subcommand("score", "Strict/fuzzy entity-level P/R/F1");
  auto gold = std::make_shared<std::string>();
  auto pred = std::make_shared<std::string>();
  auto regime = std::make_shared<std::string>("both");
  auto csv = std::make_shared<std::string>();
  auto json_out = std::make_shared<std::string>();
  auto label_column = std::make_shared<std::string>("NE-COARSE-LIT");
  cmd->add_option("--gold", *gold)->required();
  cmd->add_option("--pred", *pred)->required();
  cmd->add_option("--regime", *regime)->check(CLI::IsMember({"strict", "fuzzy", "both"}));
  cmd->add_option("--csv", *csv, "Write the CSV summary here");
  cmd->add_option("--json", *json_out, "Write the JSON report here");
  cmd->add_option("--label-column", *label_column);
  cmd->callback([=] {
    const ner::Dataset g = load_ner(*gold, *label_column, false);
    const ner::Dataset p = load_ner(*pred, *label_column, false);
    const scorer::EvalReport report = scorer::score(g, p);
    if (*regime == "strict" || *regime == "both") {
      std::cout << "strict micro F1 " << format_f1(report.strict.micro.f1()) << '\n';
    }
    if (*regime == "fuzzy" || *regime == "both") {
      std::cout << "fuzzy micro F1 " << format_f1(report.fuzzy.micro.f1()) << '\n';
    }
    if (!csv->empty()) io::write_file_atomic(*csv, report.to_csv());
    if (!json_out->empty()) io::write_file_atomic(*json_out, report.to_json() + "\n");
  });
}

void add_attr_eval_command(CLI::App& app) {
  auto* cmd = app.add_subcommand("attr-eval", "Attribute-aided bucketed evaluation");
  auto train = std::make_shared<std::string>();
  auto gold = std::make_shared<std::string>();
  auto pred = std::make_shared<std::string>();
  auto buckets = std::make_shared<std::size_t>(4);
  auto attributes = std::make_shared<std::string>("all");
  auto csv = std::make_shared<std::string>();
  auto json_out = std::make_shared<std::string>();
  auto label_column = std::make_shared<std::string>("NE-COARSE-LIT");
  auto raw = std::make_shared<bool>(false);
  cmd->add_option("--train", *train, "Training set the attributes are defined against")
      ->required();
  cmd->add_option("--gold", *gold)->required();
  cmd->add_option("--pred", *pred)->required();
  cmd->add_option("--buckets", *buckets);
  cmd->add_option("--attributes", *attributes, "Comma-separated kinds or 'all'");
  cmd->add_option("--csv", *csv);
  cmd->add_option("--json", *json_out);
  cmd->add_option("--label-column", *label_column);
  cmd->add_flag("--raw-spearman", *raw, "Correlate raw values instead of bucket means");
  cmd->callback([=] {
    const ner::Dataset train_set = load_ner(*train, *label_column, false);
    const ner::Dataset g = load_ner(*gold, *label_column, false);
    const ner::Dataset p = load_ner(*pred, *label_column, false);
    std::vector<attr_eval::AttributeKind> kinds;
    if (*attributes == "all") {
      kinds = attr_eval::all_attribute_kinds();
    } else {
      std::istringstream list(*attributes);
      std::string name;
      while (std::getline(list, name, ',')) {
        const auto kind = attr_eval::attribute_from_name(name);
        if (!kind) throw UsageError("unknown attribute '" + name + "'");
        kinds.push_back(*kind);
      }
    }
    attr_eval::ReportOptions options;
    options.n_buckets = *buckets;
    options.raw_spearman = *raw;
    std::vector<attr_eval::BucketReport> reports;
    for (const attr_eval::AttributeKind kind : kinds) {
      reports.push_back(attr_eval::attribute_report(kind, g, p, train_set, options));
    }
    for (const attr_eval::BucketReport& report : reports) {
      std::ostringstream line;
      line << attr_eval::attribute_name(report.kind) << ": ";
      if (report.rho_defined) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "rho=%.3f p=%.4f stddev=%.4f%s", report.spearman,
                      report.p_value, report.f1_stddev,
                      report.significant ? "" : " (not significant)");
        line << buf;
      } else {
        line << "rho undefined";
      }
      say(line.str());
    }
    if (!csv->empty()) io::write_file_atomic(*csv, attr_eval::reports_to_csv(reports));
    if (!json_out->empty()) {
      io::write_file_atomic(*json_out, attr_eval::reports_to_json(reports) + "\n");
    }
  });
}

void add_tagger_commands(CLI::App& app) {
  CLI::App* tagger_cmd = app.add_subcommand("tagger", "Train and run the sequence tagger");
  tagger_cmd->require_subcommand(1);

  {
    auto* cmd =
        tagger_cmd->add_subcommand("train", "Train with one-cycle decay and dev selection");
    auto config_path = std::make_shared<std::string>();
    auto train_path = std::make_shared<std::string>();
    auto dev_path = std::make_shared<std::string>();
    auto vocab_path = std::make_shared<std::string>();
    auto model_out = std::make_shared<std::string>();
    auto init_model = std::make_shared<std::string>();
    auto batch_size = std::make_shared<int>(8);
    auto epochs = std::make_shared<int>(10);
    auto lr = std::make_shared<double>(3e-5);
    auto hash_bits = std::make_shared<int>(20);
    auto label_column = std::make_shared<std::string>("NE-COARSE-LIT");
    auto normalize = std::make_shared<bool>(false);
    cmd->add_option("--config", *config_path,
                    "Experiment config supplying datasets/vocab; flags override");
    cmd->add_option("--train", *train_path);
    cmd->add_option("--dev", *dev_path);
    cmd->add_option("--vocab", *vocab_path);
    cmd->add_option("--model-out", *model_out)->required();
    cmd->add_option("--init-model", *init_model, "Warm-start from this model");
    cmd->add_option("--batch-size", *batch_size);
    cmd->add_option("--epochs", *epochs);
    cmd->add_option("--lr", *lr);
    cmd->add_option("--hash-bits", *hash_bits);
    cmd->add_option("--label-column", *label_column);
    cmd->add_flag("--normalize-long-s", *normalize);
    cmd->callback([=] {
      std::uint64_t seed = g_opts.seed;
      if (!config_path->empty()) {
        const config::ExperimentConfig cfg = config::ExperimentConfig::load(*config_path);
        cfg.validate();
        if (vocab_path->empty()) *vocab_path = cfg.vocab_path;
        if (train_path->empty() || dev_path->empty()) {
          if (cfg.datasets.empty()) throw DataError("config names no datasets");
          const auto& [language, splits] = *cfg.datasets.begin();
          if (train_path->empty() && splits.count("train")) *train_path = splits.at("train");
          if (dev_path->empty() && splits.count("dev")) *dev_path = splits.at("dev");
        }
        *label_column = cfg.label_column;
        *normalize = cfg.normalize_long_s;
        *hash_bits = cfg.hash_bits;
        seed = cfg.seed;
      }
      if (train_path->empty() || dev_path->empty() || vocab_path->empty()) {
        throw UsageError("tagger train needs --train, --dev and --vocab (or a --config)");
      }
      const wordpiece::Vocab vocab = load_vocab(*vocab_path);
      const wordpiece::Tokenizer tokenizer(vocab);
      const ner::Dataset train_set = load_ner(*train_path, *label_column, *normalize);
      const ner::Dataset dev_set = load_ner(*dev_path, *label_column, *normalize);
      tagger::TrainConfig config;
      config.batch_size = *batch_size;
      config.epochs = *epochs;
      config.learning_rate = *lr;
      config.seed = seed;
      config.hash_bits = *hash_bits;
      std::optional<tagger::TaggerModel> init;
      if (!init_model->empty()) init = tagger::TaggerModel::load(*init_model);
      const tagger::TrainResult result =
          tagger::train(config, train_set, dev_set, tokenizer, init ? &*init : nullptr);
      result.model.save(*model_out);
      std::ostringstream history;
      history << "dev F1 history:";
      for (const double f1 : result.dev_f1_history) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), " %.1f", f1);
        history << buf;
      }
      say(history.str());
      say("best_epoch=" + std::to_string(result.best_epoch));
    });
  }

  {
    auto* cmd = tagger_cmd->add_subcommand("predict", "Greedy decode");
    auto model_path = std::make_shared<std::string>();
    auto vocab_path = std::make_shared<std::string>();
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto label_column = std::make_shared<std::string>("NE-COARSE-LIT");
    cmd->add_option("--model", *model_path)->required();
    cmd->add_option("--vocab", *vocab_path)->required();
    cmd->add_option("--input", *input)->required();
    cmd->add_option("--output", *output)->required();
    cmd->add_option("--label-column", *label_column);
    cmd->callback([=] {
      const wordpiece::Vocab vocab = load_vocab(*vocab_path);
      const wordpiece::Tokenizer tokenizer(vocab);
      const tagger::TaggerModel model = tagger::TaggerModel::load(*model_path);
      const ner::Dataset input_set = load_ner(*input, *label_column, false);
      const ner::Dataset output_set = tagger::predict(model, tokenizer, input_set);
      std::string content;
      for (const ner::AnnotatedSentence& s : output_set) {
        content += ner::sentence_to_json(s);
        content += '\n';
      }
      io::write_file_atomic(*output, content);
    });
  }
}

void add_harness_commands(CLI::App& app) {
  CLI::App* harness_cmd = app.add_subcommand("harness", "Experiment orchestration");
  harness_cmd->require_subcommand(1);

  const auto make_context = [](const config::ExperimentConfig& cfg, bool resume,
                               const wordpiece::Tokenizer* tokenizer) {
    harness::RunContext ctx;
    ctx.tokenizer = tokenizer;
    ctx.jobs = g_opts.jobs > 1 ? g_opts.jobs : cfg.jobs;
    ctx.hash_bits = cfg.hash_bits;
    const std::string out = g_opts.output_dir.empty() ? cfg.output_dir : g_opts.output_dir;
    if (!out.empty()) ctx.out_dir = out;
    ctx.resume = resume;
    return ctx;
  };

  {
    auto* cmd = harness_cmd->add_subcommand("grid", "Hyperparameter grid search");
    auto config_path = std::make_shared<std::string>();
    auto resume = std::make_shared<bool>(false);
    cmd->add_option("--config", *config_path, "Experiment config (TOML or JSON)")->required();
    cmd->add_flag("--resume", *resume, "Skip cells already in the ledger");
    cmd->callback([=] {
      const config::ExperimentConfig cfg = config::ExperimentConfig::load(*config_path);
      cfg.validate();
      const wordpiece::Vocab vocab = load_vocab(cfg.vocab_path);
      const wordpiece::Tokenizer tokenizer(vocab);
      const std::vector<harness::LanguageData> languages = load_language_data(cfg);
      std::vector<ner::Dataset> trains, devs;
      for (const harness::LanguageData& l : languages) {
        trains.push_back(l.train);
        devs.push_back(l.dev);
      }
      const ner::Dataset train = ner::merge_multilingual(trains).dataset;
      const ner::Dataset dev = ner::merge_multilingual(devs).dataset;
      const harness::RunContext ctx = make_context(cfg, *resume, &tokenizer);
      const harness::GridSearchResult result =
          harness::grid_search(cfg.stage1_grid, train, dev, ctx);
      for (std::size_t i = 0; i < std::min<std::size_t>(5, result.ranked.size()); ++i) {
        const harness::RunRecord& r = result.ranked[i];
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%zu. %s dev_f1=%.1f%s", i + 1, r.run_id.c_str(),
                      r.dev_f1, r.ok ? "" : " (failed)");
        say(buf);
      }
      if (!ctx.out_dir.empty()) {
        std::string content;
        for (const harness::RunRecord& r : result.ranked) content += r.to_json() + "\n";
        io::write_file_atomic(ctx.out_dir / "grid_ranking.jsonl", content);
      }
    });
  }

  {
    auto* cmd = harness_cmd->add_subcommand("compare", "Single-model vs one-model comparison");
    auto config_path = std::make_shared<std::string>();
    auto resume = std::make_shared<bool>(false);
    cmd->add_option("--config", *config_path)->required();
    cmd->add_flag("--resume", *resume);
    cmd->callback([=] {
      const config::ExperimentConfig cfg = config::ExperimentConfig::load(*config_path);
      cfg.validate();
      const wordpiece::Vocab vocab = load_vocab(cfg.vocab_path);
      const wordpiece::Tokenizer tokenizer(vocab);
      const std::vector<harness::LanguageData> languages = load_language_data(cfg);
      const harness::RunContext ctx = make_context(cfg, *resume, &tokenizer);
      const harness::CompareReport report =
          harness::compare_single_vs_one(languages, cfg.stage1_grid, ctx);
      say("single runs=" + std::to_string(report.single_run_count) +
          " one-model runs=" + std::to_string(report.one_model_run_count));
      for (const harness::CompareRow& row : report.rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s single=%.1f one=%.1f delta=%+.2fpp",
                      row.language.c_str(), row.single_f1, row.one_model_f1, row.delta_pp);
        say(buf);
      }
      if (!ctx.out_dir.empty()) {
        io::write_file_atomic(ctx.out_dir / "compare.json", report.to_json() + "\n");
      }
    });
  }

  {
    auto* cmd =
        harness_cmd->add_subcommand("multistage", "Multilingual then per-language fine-tuning");
    auto config_path = std::make_shared<std::string>();
    auto resume = std::make_shared<bool>(false);
    cmd->add_option("--config", *config_path)->required();
    cmd->add_flag("--resume", *resume);
    cmd->callback([=] {
      const config::ExperimentConfig cfg = config::ExperimentConfig::load(*config_path);
      cfg.validate();
      const wordpiece::Vocab vocab = load_vocab(cfg.vocab_path);
      const wordpiece::Tokenizer tokenizer(vocab);
      const std::vector<harness::LanguageData> languages = load_language_data(cfg);
      const harness::RunContext ctx = make_context(cfg, *resume, &tokenizer);
      const harness::MultistageReport report =
          harness::multistage(cfg.stage1_grid, cfg.stage2_grid, languages, ctx);
      say("stage1 selected: " + report.stage1_selected.run_id);
      for (const auto& [language, record] : report.stage2_selected) {
        char buf[200];
        std::snprintf(buf, sizeof(buf), "%s stage1=%.1f stage2=%.1f delta=%+.2fpp (%s)",
                      language.c_str(), report.stage1_per_language_f1.at(language), record.dev_f1,
                      report.delta_pp.at(language), record.run_id.c_str());
        say(buf);
      }
      if (!ctx.out_dir.empty()) {
        io::write_file_atomic(ctx.out_dir / "multistage.json", report.to_json() + "\n");
      }
    });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"historical-corpus NER pipeline toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", g_opts.seed, "Seed for stochastic steps");
  app.add_option("--jobs", g_opts.jobs, "Parallel workers for the harness");
  app.add_option("--output-dir", g_opts.output_dir, "Directory for multi-file outputs");
  app.add_flag("--quiet", g_opts.quiet, "Suppress progress chatter");

  add_corpus_commands(app);
  add_vocab_commands(app);
  add_mlm_commands(app);
  add_parse_command(app);
  add_score_command(app);
  add_attr_eval_command(app);
  add_tagger_commands(app);
  add_harness_commands(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
