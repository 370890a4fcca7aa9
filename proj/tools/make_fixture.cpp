// Writes a synthetic Gaussian-cluster corpus (manifest + EMB1 file) for
// trying the CLI without real embeddings.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "srctrace/embedding_store.hpp"
#include "srctrace/synthetic.hpp"

int main(int argc, char** argv) {
  srctrace::synthetic::ClusterSpec spec;
  std::string out_dir = ".";
  std::vector<std::uint32_t> layers{0};
  CLI::App app{"Synthetic embedding fixture generator", "make_fixture"};
  app.add_option("--classes", spec.classes)->capture_default_str();
  app.add_option("--per-class", spec.per_class)->capture_default_str();
  app.add_option("--dim", spec.dim)->capture_default_str();
  app.add_option("--separation", spec.min_separation, "minimum centroid distance in sigmas (0 = all overlap)")
      ->capture_default_str();
  app.add_option("--datasets", spec.datasets)->capture_default_str();
  app.add_option("--architectures", spec.architectures)->capture_default_str();
  app.add_option("--seed", spec.seed)->capture_default_str();
  app.add_option("--layers", layers, "one EMB1 file per layer, each drawn with a different seed")->delimiter(',');
  app.add_option("--out", out_dir)->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 64;
  }

  try {
    std::filesystem::create_directories(out_dir);
    const auto base_seed = spec.seed;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      spec.layer_index = layers[i];
      spec.seed = base_seed + i;
      auto f = srctrace::synthetic::make_clusters(spec);
      const auto path = std::filesystem::path(out_dir) / ("synthetic_" + std::to_string(layers[i]) + ".emb");
      srctrace::write_embeddings(f.embeddings, path);
      if (i == 0) srctrace::write_manifest(f.records, std::filesystem::path(out_dir) / "manifest.jsonl");
      std::cout << path.string() << "\n";
    }
  } catch (const srctrace::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
