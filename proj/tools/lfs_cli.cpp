// lfs: enrolment, search, evaluation, model training and the case service.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "lfs/case_service.hpp"
#include "lfs/cmc.hpp"
#include "lfs/config.hpp"
#include "lfs/gallery.hpp"
#include "lfs/image.hpp"
#include "lfs/search.hpp"
#include "lfs/synthetic.hpp"
#include "lfs/template_builder.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

lfs::EngineConfig config_from(const std::string& path) {
  return path.empty() ? lfs::EngineConfig{} : lfs::load_config(path);
}

std::vector<fs::path> pgm_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (de.is_regular_file() && de.path().extension() == ".pgm") {
      out.push_back(de.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_debug_images(const lfs::LatentTemplates& t, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < t.processed.size(); ++k) {
    const auto& p = t.processed[k];
    lfs::write_pgm(p.pixels, dir / (stem + "_" + std::to_string(k + 1) + "_" +
                                    std::string(lfs::pipeline_tag_name(p.tag)) + ".pgm"));
  }
}

json candidates_json(const lfs::CandidateList& list) {
  json arr = json::array();
  std::size_t rank = 0;
  for (const auto& e : list.entries) {
    arr.push_back({{"rank", ++rank},
                   {"reference_id", e.reference_id},
                   {"score", e.score},
                   {"minutiae_scores", e.minutiae_scores},
                   {"texture_score", e.texture_score}});
  }
  return arr;
}

// probe file name -> mate id; falls back to the file stem
std::map<std::string, std::string> read_truth(const fs::path& dir) {
  std::map<std::string, std::string> truth;
  std::ifstream in(dir / "truth.txt");
  std::string probe, mate;
  while (in >> probe >> mate) {
    truth[probe] = mate;
  }
  return truth;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent fingerprint search engine"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Engine configuration file (key = value)")->check(CLI::ExistingFile);

  // enroll
  auto* enroll = app.add_subcommand("enroll", "Build reference templates for every .pgm in a directory");
  std::string enroll_dir, enroll_out, models_dir;
  enroll->add_option("dir", enroll_dir, "Directory of reference images")->required()->check(CLI::ExistingDirectory);
  enroll->add_option("--out", enroll_out, "Gallery output directory")->required();
  enroll->add_option("--models", models_dir, "Trained model directory")->required()->check(CLI::ExistingDirectory);

  // search
  auto* search = app.add_subcommand("search", "Search one latent against a gallery");
  std::string latent_path, gallery_dir, debug_dir;
  std::size_t topk = 0;
  std::size_t workers = 0;
  bool as_json = false;
  search->add_option("latent", latent_path, "Latent image (.pgm)")->required()->check(CLI::ExistingFile);
  search->add_option("--gallery", gallery_dir, "Gallery directory")->required()->check(CLI::ExistingDirectory);
  search->add_option("--models", models_dir, "Trained model directory")->required()->check(CLI::ExistingDirectory);
  search->add_option("--topk", topk, "Candidate list length (default from config, 20)");
  search->add_option("--workers", workers, "Worker threads");
  search->add_flag("--json", as_json, "Print the candidate list as JSON");
  search->add_option("--debug-dir", debug_dir, "Write the five processed images here");

  // eval
  auto* eval = app.add_subcommand("eval", "Closed-set identification over a probe directory");
  std::string probes_dir, cmc_path;
  std::size_t max_rank = 20;
  eval->add_option("--probes", probes_dir, "Directory of latent images (+ optional truth.txt)")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--gallery", gallery_dir, "Gallery directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--models", models_dir, "Trained model directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--cmc", cmc_path, "CMC output CSV")->required();
  eval->add_option("--max-rank", max_rank, "Highest rank in the CMC curve");
  eval->add_option("--workers", workers, "Worker threads");

  // codebook train
  auto* codebook = app.add_subcommand("codebook", "Descriptor model training");
  codebook->require_subcommand(1);
  auto* train = codebook->add_subcommand("train", "Train compressor, PQ codebook and d0 from reference images");
  std::string corpus_dir, train_out;
  lfs::ModelTrainingOptions train_opts;
  train->add_option("corpus", corpus_dir, "Directory of reference images")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", train_out, "Model output directory")->required();
  train->add_option("--epochs", train_opts.compressor.epochs, "Compressor epochs");
  train->add_option("--subquantizers", train_opts.pq.subquantizers, "PQ subquantizers (m)");
  train->add_option("--seed", train_opts.seed, "Seed");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP service for the examiner workbench");
  std::string cases_dir, host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--cases", cases_dir, "Directory of case images")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--gallery", gallery_dir, "Gallery directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--models", models_dir, "Trained model directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");

  // synth
  auto* synth = app.add_subcommand("synth", "Write synthetic reference prints and latent copies");
  std::string synth_out;
  int synth_count = 20;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "Output directory (refs/ and latents/)")->required();
  synth->add_option("--count", synth_count, "Number of prints")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Seed");

  // config
  auto* show = app.add_subcommand("config", "Print the effective configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    auto config = config_from(config_path);
    if (workers > 0) {
      config.workers = workers;
    }
    if (topk > 0) {
      config.topk = topk;
    }

    if (*show) {
      std::cout << lfs::format_config(config);
      return 0;
    }

    if (*enroll) {
      const auto models = lfs::load_models(models_dir);
      const auto report = lfs::enroll_directory(enroll_dir, enroll_out, config, models);
      std::cout << "enrolled " << report.enrolled << " references into " << enroll_out << "\n";
      for (const auto& f : report.failures) {
        std::cerr << "failed: " << f << "\n";
      }
      return report.failures.empty() ? 0 : 1;
    }

    if (*search) {
      const auto models = lfs::load_models(models_dir);
      const auto index = lfs::load_gallery(fs::path(gallery_dir) / "manifest.txt", models.codebook);
      const auto image = lfs::read_pgm(latent_path);
      const auto latent = lfs::build_latent_templates(image, config, models.compressor);
      if (!debug_dir.empty()) {
        write_debug_images(latent, debug_dir, fs::path(latent_path).stem().string());
      }
      const auto probe = lfs::PreparedProbe::prepare(latent.minutiae, latent.texture, index.codebook());
      const auto list = lfs::search_gallery(probe, index, lfs::search_options(config, models.d0));
      if (as_json) {
        std::cout << json{{"latent", latent_path}, {"candidates", candidates_json(list)}}.dump(2) << "\n";
      } else {
        std::size_t rank = 0;
        for (const auto& e : list.entries) {
          std::cout << std::setw(4) << ++rank << "  " << std::left << std::setw(24) << e.reference_id << std::right
                    << std::fixed << std::setprecision(4) << e.score << "  [" << e.minutiae_scores[0] << ' '
                    << e.minutiae_scores[1] << ' ' << e.minutiae_scores[2] << " | " << e.texture_score << "]\n";
        }
      }
      return 0;
    }

    if (*eval) {
      const auto models = lfs::load_models(models_dir);
      const auto index = lfs::load_gallery(fs::path(gallery_dir) / "manifest.txt", models.codebook);
      const auto truth = read_truth(probes_dir);
      const auto files = pgm_files(probes_dir);
      const auto options = lfs::search_options(config, models.d0);
      std::vector<std::string> gallery_ids;
      for (const auto& e : index.entries()) {
        gallery_ids.push_back(e.id);
      }
      Eigen::MatrixXd scores(static_cast<Eigen::Index>(files.size()), static_cast<Eigen::Index>(index.size()));
      std::vector<std::string> mates;
      for (std::size_t p = 0; p < files.size(); ++p) {
        const auto name = files[p].filename().string();
        const auto it = truth.find(name);
        mates.push_back(it != truth.end() ? it->second : files[p].stem().string());
        const auto latent = lfs::build_latent_templates(lfs::read_pgm(files[p]), config, models.compressor);
        const auto probe = lfs::PreparedProbe::prepare(latent.minutiae, latent.texture, index.codebook());
        const auto row = lfs::score_all(probe, index, options);
        for (std::size_t j = 0; j < row.size(); ++j) {
          scores(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = row[j].score;
        }
        std::cerr << "probe " << (p + 1) << "/" << files.size() << " " << name << "\n";
      }
      const auto curve =
          lfs::evaluate_cmc(scores, gallery_ids, mates, std::min<std::size_t>(max_rank, gallery_ids.size()));
      lfs::write_cmc_csv(curve, cmc_path);
      if (curve.max_rank() > 0) {
        std::cout << "rank-1 " << curve.rate(1) << "\n";
      }
      return 0;
    }

    if (*train) {
      std::vector<lfs::GrayImage> images;
      for (const auto& f : pgm_files(corpus_dir)) {
        images.push_back(lfs::read_pgm(f));
      }
      const auto models = lfs::train_models(images, config, train_opts);
      lfs::save_models(models, train_out);
      std::cout << "trained on " << images.size() << " images; d0 = " << models.d0 << "\n";
      return 0;
    }

    if (*serve) {
      const auto models = lfs::load_models(models_dir);
      const auto index = lfs::load_gallery(fs::path(gallery_dir) / "manifest.txt", models.codebook);
      lfs::CaseService service(cases_dir, index, models, config);
      std::cout << "serving " << index.size() << " references on " << host << ":" << port << "\n" << std::flush;
      lfs::run_service(service, host, port);
      return 0;
    }

    if (*synth) {
      const fs::path out(synth_out);
      fs::create_directories(out / "refs");
      fs::create_directories(out / "latents");
      std::ofstream truth(out / "latents" / "truth.txt");
      for (int i = 0; i < synth_count; ++i) {
        std::ostringstream id;
        id << "ref" << std::setw(4) << std::setfill('0') << i;
        lfs::PrintOptions po;
        po.seed = synth_seed * 1000003ULL + static_cast<std::uint64_t>(i);
        const auto print = lfs::synthesize_print(po);
        lfs::write_pgm(print.image, out / "refs" / (id.str() + ".pgm"));
        lfs::write_pgm(lfs::make_latent(print.image, po.seed ^ 0x9e3779b9ULL),
                       out / "latents" / ("latent_" + id.str() + ".pgm"));
        truth << "latent_" << id.str() << ".pgm " << id.str() << "\n";
      }
      std::cout << "wrote " << synth_count << " prints to " << out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
