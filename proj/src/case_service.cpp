#include "lfs/case_service.hpp"

#include <httplib.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <regex>
#include <sstream>

#include "lfs/image.hpp"

namespace lfs {

using nlohmann::json;

struct CaseService::CaseState {
  GrayImage image;
  LatentTemplates templates;
  std::uint64_t version = 0;
  std::optional<std::vector<Minutia>> edited;
  std::shared_mutex mutex;
};

namespace {

ServiceResponse error(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

bool valid_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9_.-]{1,128}");
  return std::regex_match(id, pattern) && id.find("..") == std::string::npos;
}

json minutia_json(const Minutia& m) {
  return {{"x", m.x}, {"y", m.y}, {"theta", m.theta}, {"kind", m.kind == MinutiaKind::kReal ? "real" : "virtual"}};
}

json minutiae_json(const std::vector<Minutia>& ms) {
  json arr = json::array();
  for (const auto& m : ms) {
    arr.push_back(minutia_json(m));
  }
  return arr;
}

std::vector<Minutia> parse_minutiae(const json& arr, int width, int height) {
  if (!arr.is_array()) {
    throw std::invalid_argument("'minutiae' must be an array");
  }
  std::vector<Minutia> out;
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("x") || !item.contains("y") || !item.contains("theta") ||
        !item["x"].is_number() || !item["y"].is_number() || !item["theta"].is_number()) {
      throw std::invalid_argument("each minutia needs numeric x, y and theta");
    }
    Minutia m{item["x"].get<double>(), item["y"].get<double>(), item["theta"].get<double>(), MinutiaKind::kReal};
    if (!std::isfinite(m.x) || !std::isfinite(m.y) || m.x < 0.0 || m.y < 0.0 || m.x >= width || m.y >= height) {
      throw std::invalid_argument("minutia position outside the image");
    }
    if (!(m.theta >= 0.0 && m.theta < kTwoPi)) {
      throw std::invalid_argument("minutia theta must lie in [0, 2pi)");
    }
    out.push_back(m);
  }
  return out;
}

std::filesystem::path edits_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".minutiae.json");
}

json fields_json(const RidgeFields& f) {
  std::vector<int> roi(f.roi.begin(), f.roi.end());
  return {{"block_size", f.block_size}, {"rows", f.rows},         {"cols", f.cols},
          {"orientation", f.orientation}, {"spacing", f.spacing}, {"quality", f.quality},
          {"roi", roi}};
}

void append_links(json& out, const char* name, const MatchResult& r, const std::vector<Minutia>& latent,
                  const std::vector<Minutia>& reference) {
  for (const auto& c : r.surviving) {
    const auto& a = latent.at(c.latent_index);
    const auto& b = reference.at(c.reference_index);
    out.push_back({{"template", name},
                   {"latent_index", c.latent_index},
                   {"reference_index", c.reference_index},
                   {"similarity", c.similarity},
                   {"latent", {{"x", a.x}, {"y", a.y}}},
                   {"reference", {{"x", b.x}, {"y", b.y}}}});
  }
}

}  // namespace

CaseService::CaseService(std::filesystem::path cases_dir, const GalleryIndex& gallery, EngineModels models,
                         EngineConfig config)
    : cases_dir_(std::move(cases_dir)), gallery_(gallery), models_(std::move(models)), config_(std::move(config)) {}

CaseService::~CaseService() = default;

std::shared_ptr<CaseService::CaseState> CaseService::load_case(const std::string& id) {
  {
    std::shared_lock lock(mutex_);
    if (const auto it = cases_.find(id); it != cases_.end()) {
      return it->second;
    }
  }
  const auto image_path = cases_dir_ / (id + ".pgm");
  if (!valid_id(id) || !std::filesystem::exists(image_path)) {
    return nullptr;
  }
  auto state = std::make_shared<CaseState>();
  state->image = read_pgm(image_path);
  state->templates = build_latent_templates(state->image, config_, models_.compressor);
  if (const auto ep = edits_path(cases_dir_, id); std::filesystem::exists(ep)) {
    std::ifstream in(ep);
    const auto j = json::parse(in);
    state->version = j.at("version").get<std::uint64_t>();
    state->edited = parse_minutiae(j.at("minutiae"), state->image.width, state->image.height);
  }
  std::unique_lock lock(mutex_);
  const auto [it, inserted] = cases_.emplace(id, state);
  return it->second;
}

ServiceResponse CaseService::get_case(const std::string& id) {
  const auto state = load_case(id);
  if (!state) {
    return error(404, "no such case '" + id + "'");
  }
  std::shared_lock lock(state->mutex);
  const auto pgm = encode_pgm(state->image);
  const std::string raw(pgm.begin(), pgm.end());
  const auto& minutiae = state->edited ? *state->edited : state->templates.minutiae[2].minutiae;
  json j = {{"id", id},
            {"version", state->version},
            {"width", state->image.width},
            {"height", state->image.height},
            {"image_format", "pgm"},
            {"image", httplib::detail::base64_encode(raw)},
            {"edited", state->edited.has_value()},
            {"minutiae", minutiae_json(minutiae)},
            {"fields", fields_json(state->templates.fields)}};
  return {200, j.dump()};
}

ServiceResponse CaseService::put_minutiae(const std::string& id, const std::string& body) {
  const auto state = load_case(id);
  if (!state) {
    return error(404, "no such case '" + id + "'");
  }
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("version") || !j["version"].is_number_unsigned() || !j.contains("minutiae")) {
    return error(400, "body needs an unsigned 'version' and a 'minutiae' array");
  }
  std::unique_lock lock(state->mutex);
  if (j["version"].get<std::uint64_t>() != state->version) {
    return {409, json{{"error", "version mismatch"}, {"version", state->version}}.dump()};
  }
  std::vector<Minutia> edited;
  try {
    edited = parse_minutiae(j["minutiae"], state->image.width, state->image.height);
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  }
  const auto next = state->version + 1;
  const auto path = edits_path(cases_dir_, id);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) {
      return error(500, "cannot persist edits");
    }
    out << json{{"version", next}, {"minutiae", minutiae_json(edited)}}.dump(1) << "\n";
  }
  std::filesystem::rename(tmp, path);
  state->version = next;
  state->edited = std::move(edited);
  return {200, json{{"id", id}, {"version", next}, {"count", state->edited->size()}}.dump()};
}

ServiceResponse CaseService::search(const std::string& id, std::size_t topk) {
  const auto state = load_case(id);
  if (!state) {
    return error(404, "no such case '" + id + "'");
  }
  std::array<MinutiaeTemplate, 3> minutiae;
  TextureTemplate texture;
  std::uint64_t version = 0;
  {
    std::shared_lock lock(state->mutex);
    minutiae = state->templates.minutiae;
    texture = state->templates.texture;
    version = state->version;
    if (state->edited) {
      minutiae[2].source = TemplateSource::kManual;
      minutiae[2].minutiae = *state->edited;
      minutiae[2].descriptors =
          describe(state->templates.processed[2].pixels, minutiae[2].minutiae, models_.compressor);
    }
  }
  const auto probe = PreparedProbe::prepare(minutiae, texture, gallery_.codebook());
  auto options = search_options(config_, models_.d0);
  options.topk = topk;
  const auto list = search_gallery(probe, gallery_, options);

  json candidates = json::array();
  std::size_t rank = 0;
  for (const auto& e : list.entries) {
    const auto* ref = gallery_.find(e.reference_id);
    const auto detail = explain_candidate(probe, *ref, options);
    json links = json::array();
    static constexpr const char* kNames[3] = {"set1", "set3", "common"};
    for (std::size_t k = 0; k < 3; ++k) {
      append_links(links, kNames[k], detail.minutiae[k], minutiae[k].minutiae, ref->minutiae.minutiae);
    }
    append_links(links, "texture", detail.texture, texture.minutiae, ref->texture.minutiae);
    candidates.push_back({{"rank", ++rank},
                          {"reference_id", e.reference_id},
                          {"score", e.score},
                          {"minutiae_scores", e.minutiae_scores},
                          {"texture_score", e.texture_score},
                          {"correspondences", links}});
  }
  return {200, json{{"id", id}, {"version", version}, {"candidates", candidates}}.dump()};
}

ServiceResponse CaseService::reference_image(const std::string& id) const {
  const auto* ref = gallery_.find(id);
  if (!ref) {
    return error(404, "no such reference '" + id + "'");
  }
  if (!ref->image_path || !std::filesystem::exists(*ref->image_path)) {
    return error(404, "reference '" + id + "' has no image");
  }
  const auto bytes = encode_pgm(read_pgm(*ref->image_path));
  return {200, std::string(bytes.begin(), bytes.end()), "image/x-portable-graymap"};
}

void CaseService::mount(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  auto guarded = [reply](auto&& fn) {
    return [reply, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        reply(res, fn(req));
      } catch (const std::exception& e) {
        reply(res, error(500, e.what()));
      }
    };
  };
  server.Get(R"(/cases/([^/]+))", guarded([this](const httplib::Request& req) { return get_case(req.matches[1]); }));
  server.Put(R"(/cases/([^/]+)/minutiae)",
             guarded([this](const httplib::Request& req) { return put_minutiae(req.matches[1], req.body); }));
  server.Post(R"(/cases/([^/]+)/search)", guarded([this](const httplib::Request& req) {
                std::size_t topk = config_.topk;
                if (req.has_param("topk")) {
                  const auto v = req.get_param_value("topk");
                  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 6) {
                    return error(400, "topk must be a non-negative integer");
                  }
                  topk = static_cast<std::size_t>(std::stoul(v));
                }
                return search(req.matches[1], topk);
              }));
  server.Get(R"(/references/([^/]+)/image)",
             guarded([this](const httplib::Request& req) { return reference_image(req.matches[1]); }));
}

void run_service(CaseService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, port)) {
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace lfs
