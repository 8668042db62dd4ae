#include "lfs/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "lfs/descriptor.hpp"
#include "lfs/template_io.hpp"

namespace lfs {
namespace {

constexpr std::size_t kStages = 4;
constexpr std::size_t kNearCandidates = 32;

std::vector<std::size_t> layer_widths(std::size_t in, std::size_t out) { return {in, in, 160, 128, out}; }

struct Activations {
  std::vector<Eigen::MatrixXf> h;  // h[0] = input, h[l + 1] = output of stage l
};

Activations forward_batch(const CompressorModel& model, const Eigen::MatrixXf& x) {
  Activations act;
  act.h.reserve(kStages + 1);
  act.h.push_back(x);
  for (std::size_t l = 0; l < kStages; ++l) {
    Eigen::MatrixXf z = model.weights()[l] * act.h.back();
    z.colwise() += model.biases()[l];
    if (l + 1 < kStages) {
      z = z.array().tanh().matrix();
    }
    act.h.push_back(std::move(z));
  }
  return act;
}

void backward_batch(const CompressorModel& model, const Activations& act, Eigen::MatrixXf grad_out,
                    std::vector<Eigen::MatrixXf>& gw, std::vector<Eigen::VectorXf>& gb) {
  for (std::size_t l = kStages; l-- > 0;) {
    gw[l].noalias() += grad_out * act.h[l].transpose();
    gb[l] += grad_out.rowwise().sum();
    if (l == 0) {
      break;
    }
    Eigen::MatrixXf g = model.weights()[l].transpose() * grad_out;
    // act.h[l] is tanh output of stage l - 1
    g = (g.array() * (1.0f - act.h[l].array().square())).matrix();
    grad_out = std::move(g);
  }
}

double cosine_rows(const std::vector<float>& a, const std::vector<float>& b) { return cosine(a, b); }

}  // namespace

CompressorModel::CompressorModel(std::size_t input_width, std::size_t output_width, std::uint64_t seed) {
  if (input_width == 0 || output_width == 0) {
    throw std::invalid_argument("compressor widths must be positive");
  }
  const auto widths = layer_widths(input_width, output_width);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < kStages; ++l) {
    const auto fan_in = widths[l];
    const auto fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXf w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = static_cast<float>(dist(rng));
      }
    }
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXf::Zero(static_cast<Eigen::Index>(fan_out)));
  }
}

std::size_t CompressorModel::input_width() const noexcept {
  return weights_.empty() ? 0 : static_cast<std::size_t>(weights_.front().cols());
}

std::size_t CompressorModel::output_width() const noexcept {
  return weights_.empty() ? 0 : static_cast<std::size_t>(weights_.back().rows());
}

std::vector<float> CompressorModel::forward(std::span<const float> input) const {
  if (empty()) {
    throw std::logic_error("compressor model is empty");
  }
  if (input.size() != input_width()) {
    throw std::invalid_argument("compressor input has the wrong width");
  }
  Eigen::VectorXf h = Eigen::Map<const Eigen::VectorXf>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t l = 0; l < kStages; ++l) {
    Eigen::VectorXf z = weights_[l] * h + biases_[l];
    if (l + 1 < kStages) {
      z = z.array().tanh().matrix();
    }
    h = std::move(z);
  }
  double ss = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    ss += static_cast<double>(h[i]) * h[i];
  }
  std::vector<float> out(static_cast<std::size_t>(h.size()));
  const double inv = ss > 0.0 ? 1.0 / std::sqrt(ss) : 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<float>(h[i] * inv);
  }
  return out;
}

bool CompressorModel::operator==(const CompressorModel& other) const {
  if (weights_.size() != other.weights_.size()) {
    return false;
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rows() != other.weights_[l].rows() || weights_[l].cols() != other.weights_[l].cols() ||
        weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) {
      return false;
    }
  }
  return true;
}

CompressorModel train_compressor(std::span<const std::vector<float>> corpus, const CompressorOptions& options,
                                 CompressorTrainingReport* report) {
  if (corpus.size() < options.min_corpus) {
    throw std::invalid_argument("compressor corpus has " + std::to_string(corpus.size()) +
                                " descriptors; at least " + std::to_string(options.min_corpus) + " are required");
  }
  if (corpus.size() < 2) {
    throw std::invalid_argument("compressor corpus needs at least two descriptors");
  }
  const std::size_t in_width = corpus.front().size();
  for (const auto& row : corpus) {
    if (row.size() != in_width) {
      throw std::invalid_argument("compressor corpus rows differ in width");
    }
  }
  if (options.batch_size == 0 || options.epochs <= 0) {
    throw std::invalid_argument("compressor training needs positive epochs and batch size");
  }

  CompressorModel model(in_width, options.output_width, options.seed);
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);

  std::vector<Eigen::MatrixXf> m_w, v_w;
  std::vector<Eigen::VectorXf> m_b, v_b;
  for (std::size_t l = 0; l < kStages; ++l) {
    m_w.push_back(Eigen::MatrixXf::Zero(model.weights()[l].rows(), model.weights()[l].cols()));
    v_w.push_back(m_w.back());
    m_b.push_back(Eigen::VectorXf::Zero(model.biases()[l].size()));
    v_b.push_back(m_b.back());
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  long step = 0;

  const auto in_rows = static_cast<Eigen::Index>(in_width);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    // pair list for this epoch
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(options.pairs_per_epoch);
    for (std::size_t p = 0; p < options.pairs_per_epoch; ++p) {
      const std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      if (p % 2 == 1) {
        double best = -2.0;
        for (std::size_t c = 0; c < kNearCandidates; ++c) {
          const std::size_t cand = pick(rng);
          if (cand == i) {
            continue;
          }
          const double s = cosine_rows(corpus[i], corpus[cand]);
          if (s > best) {
            best = s;
            j = cand;
          }
        }
      }
      if (j == i) {
        j = (i + 1) % corpus.size();
      }
      pairs.emplace_back(i, j);
    }

    double epoch_loss = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < pairs.size(); start += options.batch_size) {
      const std::size_t b = std::min(options.batch_size, pairs.size() - start);
      const auto cols = static_cast<Eigen::Index>(b);
      Eigen::MatrixXf xa(in_rows, cols);
      Eigen::MatrixXf xb(in_rows, cols);
      Eigen::VectorXf target(cols);
      for (std::size_t k = 0; k < b; ++k) {
        const auto& [i, j] = pairs[start + k];
        xa.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXf>(corpus[i].data(), in_rows);
        xb.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXf>(corpus[j].data(), in_rows);
        target[static_cast<Eigen::Index>(k)] = static_cast<float>(cosine_rows(corpus[i], corpus[j]));
      }
      const auto act_a = forward_batch(model, xa);
      const auto act_b = forward_batch(model, xb);
      const Eigen::MatrixXf& ya = act_a.h.back();
      const Eigen::MatrixXf& yb = act_b.h.back();
      const Eigen::RowVectorXf na = ya.colwise().norm().cwiseMax(1e-12f);
      const Eigen::RowVectorXf nb = yb.colwise().norm().cwiseMax(1e-12f);
      const Eigen::MatrixXf ua = ya.array().rowwise() / na.array();
      const Eigen::MatrixXf ub = yb.array().rowwise() / nb.array();
      const Eigen::RowVectorXf cos_out = (ua.array() * ub.array()).colwise().sum();
      const Eigen::RowVectorXf diff = cos_out - target.transpose();
      epoch_loss += diff.array().square().sum();
      counted += b;

      const Eigen::RowVectorXf r = diff * (2.0f / static_cast<float>(b));
      Eigen::MatrixXf ga = ub - (ua.array().rowwise() * cos_out.array()).matrix();
      ga = (ga.array().rowwise() * (r.array() / na.array())).matrix();
      Eigen::MatrixXf gb_out = ua - (ub.array().rowwise() * cos_out.array()).matrix();
      gb_out = (gb_out.array().rowwise() * (r.array() / nb.array())).matrix();

      std::vector<Eigen::MatrixXf> gw;
      std::vector<Eigen::VectorXf> gbias;
      for (std::size_t l = 0; l < kStages; ++l) {
        gw.push_back(Eigen::MatrixXf::Zero(model.weights()[l].rows(), model.weights()[l].cols()));
        gbias.push_back(Eigen::VectorXf::Zero(model.biases()[l].size()));
      }
      backward_batch(model, act_a, std::move(ga), gw, gbias);
      backward_batch(model, act_b, std::move(gb_out), gw, gbias);

      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      const auto lr = static_cast<float>(options.learning_rate * std::sqrt(c2) / c1);
      for (std::size_t l = 0; l < kStages; ++l) {
        m_w[l] = kBeta1 * m_w[l] + (1.0 - kBeta1) * gw[l];
        v_w[l] = kBeta2 * v_w[l] + (1.0 - kBeta2) * gw[l].cwiseProduct(gw[l]);
        model.weights()[l].array() -= lr * m_w[l].array() / (v_w[l].array().sqrt() + kEps);
        m_b[l] = kBeta1 * m_b[l] + (1.0 - kBeta1) * gbias[l];
        v_b[l] = kBeta2 * v_b[l] + (1.0 - kBeta2) * gbias[l].cwiseProduct(gbias[l]);
        model.biases()[l].array() -= lr * m_b[l].array() / (v_b[l].array().sqrt() + kEps);
      }
    }
    if (report != nullptr) {
      report->epoch_losses.push_back(counted > 0 ? epoch_loss / static_cast<double>(counted) : 0.0);
    }
  }
  return model;
}

Descriptor compress_descriptor(const CompressorModel& model, const Descriptor& raw) {
  if (raw.stage != DescriptorStage::kRaw) {
    throw std::invalid_argument("compress_descriptor expects a raw descriptor");
  }
  if (raw.values.size() != model.input_width()) {
    throw std::invalid_argument("raw descriptor length does not match the compressor input");
  }
  return Descriptor::compressed(model.forward(raw.values));
}

std::vector<std::uint8_t> serialize_compressor(const CompressorModel& model) {
  ByteWriter w;
  w.tag("LFCM");
  w.u16(1);
  w.u16(static_cast<std::uint16_t>(model.weights().size()));
  for (std::size_t l = 0; l < model.weights().size(); ++l) {
    const auto& m = model.weights()[l];
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        w.f32(m(r, c));
      }
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      w.f32(model.biases()[l][r]);
    }
  }
  return std::move(w).take();
}

CompressorModel deserialize_compressor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_tag("LFCM");
  if (r.u16() != 1) {
    throw FormatError("unsupported compressor version");
  }
  const auto stages = r.u16();
  if (stages != kStages) {
    throw FormatError("compressor must have four stages");
  }
  CompressorModel model;
  for (std::size_t l = 0; l < stages; ++l) {
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) {
      throw FormatError("compressor stage has implausible dimensions");
    }
    if (l > 0 && cols != model.weights().back().rows()) {
      throw FormatError("compressor stages do not chain");
    }
    Eigen::MatrixXf m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        m(i, j) = r.f32();
      }
    }
    Eigen::VectorXf b(rows);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b[i] = r.f32();
    }
    model.weights().push_back(std::move(m));
    model.biases().push_back(std::move(b));
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after compressor");
  }
  return model;
}

void write_compressor(const CompressorModel& model, const std::filesystem::path& path) {
  write_binary_file(serialize_compressor(model), path);
}

CompressorModel read_compressor(const std::filesystem::path& path) {
  return deserialize_compressor(read_binary_file(path));
}

}  // namespace lfs
