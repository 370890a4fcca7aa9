#pragma once

// Batch experiment commands behind the `srctrace` executable. Each command
// reads its inputs, writes CSV/JSON artifacts into RunConfig::out and a short
// summary to `log`. Errors surface as srctrace::Error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "srctrace/embedding_store.hpp"
#include "srctrace/protocol.hpp"

namespace srctrace::cli {

struct RunConfig {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> embeddings;
  std::string embeddings_template;  // e.g. "emb/w2v-bert-2.0_{layer}.emb"
  std::vector<std::uint32_t> layers;
  std::string target = "checkpoint";  // checkpoint | acoustic_model | vocoder | ... | relabel:<path>
  std::string split = "ratio:0.8";    // ratio:a[:b[:c]] | per-class:n | leave-n-out:n|half
  std::string group_by = "acoustic_model";
  std::vector<std::string> grid{"10", "50", "100", "500", "0.8"};
  std::size_t per_dataset = 4;
  std::vector<std::size_t> ks{21};
  std::vector<std::uint64_t> seeds{0};
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::filesystem::path protocol;  // optional published split file
  bool condense = false;
  std::filesystem::path out = ".";
};

LabelTarget parse_target(const std::string& text);
SplitSpec parse_split(const std::string& text, std::uint64_t seed, const std::string& group_by);

int cmd_ingest(const RunConfig& cfg, std::ostream& log);
int cmd_attribute(const RunConfig& cfg, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, std::ostream& log);
int cmd_ood(const RunConfig& cfg, std::ostream& log);
int cmd_analyze_neighbors(const RunConfig& cfg, std::ostream& log);
int cmd_condense(const RunConfig& cfg, std::ostream& log);
int cmd_report(const RunConfig& cfg, std::ostream& log);

}  // namespace srctrace::cli
