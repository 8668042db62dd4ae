#pragma once

// HTTP service behind the examiner workbench. Payloads are JSON objects:
//
//   GET  /cases/{id}
//     -> {"id", "version", "width", "height", "image_format": "pgm",
//         "image": <base64 PGM>, "edited": bool,
//         "minutiae": [{"x", "y", "theta", "kind"}],
//         "fields": {"block_size", "rows", "cols", "orientation": [...],
//                    "spacing": [...], "quality": [...], "roi": [0|1 ...]}}
//   PUT  /cases/{id}/minutiae   body {"version": n, "minutiae": [...]}
//     -> {"id", "version": n + 1, "count"}; 409 when n is stale
//   POST /cases/{id}/search?topk=K
//     -> {"id", "version", "candidates": [{"rank", "reference_id", "score",
//         "minutiae_scores": [s1, s2, s3], "texture_score",
//         "correspondences": [{"template": "set1"|"set3"|"common"|"texture",
//           "latent_index", "reference_index", "similarity",
//           "latent": {"x", "y"}, "reference": {"x", "y"}}]}]}
//   GET  /references/{id}/image -> binary PGM
//
// Errors come back as {"error": message} with 400, 404 or 409.
// A case is <cases_dir>/<id>.pgm; edits persist in <id>.minutiae.json.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "lfs/config.hpp"
#include "lfs/gallery.hpp"
#include "lfs/search.hpp"
#include "lfs/template_builder.hpp"

namespace httplib {
class Server;
}

namespace lfs {

struct ServiceResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class CaseService {
 public:
  CaseService(std::filesystem::path cases_dir, const GalleryIndex& gallery, EngineModels models,
              EngineConfig config);
  ~CaseService();

  ServiceResponse get_case(const std::string& id);
  ServiceResponse put_minutiae(const std::string& id, const std::string& body);
  ServiceResponse search(const std::string& id, std::size_t topk);
  ServiceResponse reference_image(const std::string& id) const;

  /// Registers the four routes on `server`.
  void mount(httplib::Server& server);

 private:
  struct CaseState;

  std::shared_ptr<CaseState> load_case(const std::string& id);

  std::filesystem::path cases_dir_;
  const GalleryIndex& gallery_;
  EngineModels models_;
  EngineConfig config_;
  std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<CaseState>> cases_;
};

/// Blocks serving on host:port until the server is stopped.
void run_service(CaseService& service, const std::string& host, int port);

}  // namespace lfs
