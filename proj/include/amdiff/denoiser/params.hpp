#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "amdiff/core/error.hpp"
#include "amdiff/denoiser/graph.hpp"
#include "amdiff/molio/element.hpp"
#include "amdiff/molio/pdb.hpp"

namespace amdiff::denoiser {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenoiserConfig {
  std::size_t hidden = 64;
  std::size_t layers = 4;
  std::size_t k = 8;
  std::size_t n_types = molio::kNumAtomTypes;
  std::size_t vocab = 0;  // W; motif IDs are one-hot over W + 1 slots
  std::size_t cond_dim = molio::kPocketFeatureDim;
  std::size_t rbf = 16;
  std::size_t time_dim = 16;
  double rbf_cutoff = 10.0;  // Angstrom
  std::size_t time_steps = 1000;  // T, used to normalize the time embedding

  std::size_t id_dim() const { return vocab + 1; }
  std::size_t edge_dim() const { return 2 * hidden + kNumEdgeTypes + time_dim + rbf + 1; }

  void validate() const {
    if (hidden < 1 || layers < 1 || k < 1 || n_types < 2 || rbf < 2 || time_dim < 2 || time_dim % 2 != 0 ||
        !(rbf_cutoff > 0.0) || time_steps < 1)
      throw ConfigError("invalid denoiser shape");
  }
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

// All learnable tensors in one flat buffer; blocks are row-major.
class DenoiserParams {
public:
  struct Layer {
    std::size_t mes_w1, mes_b1, mes_w2, mes_b2;
    std::size_t node_w1, node_b1, node_w2, node_b2;
    std::size_t coord_w1, coord_b1, coord_w2, coord_b2;
  };
  struct Head {
    std::size_t w1, b1, w2, b2;
  };

  DenoiserParams() = default;

  explicit DenoiserParams(const DenoiserConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const std::size_t h = cfg.hidden;
    atom_w_ = add("embed.atom.w", cfg.n_types, h);
    atom_b_ = add("embed.atom.b", 1, h);
    motif_w_ = add("embed.motif.w", cfg.id_dim(), h);
    motif_b_ = add("embed.motif.b", 1, h);
    cond_w_ = add("embed.pocket.w", cfg.cond_dim, h);
    cond_b_ = add("embed.pocket.b", 1, h);
    topo_lig_ = add("embed.topo_ligand.w", kTopoDim, h);
    topo_cond_ = add("embed.topo_pocket.w", kTopoDim, h);
    null_ = add("embed.null", 1, h);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Layer L{};
      L.mes_w1 = add(p + "mes.w1", cfg.edge_dim(), h);
      L.mes_b1 = add(p + "mes.b1", 1, h);
      L.mes_w2 = add(p + "mes.w2", h, h);
      L.mes_b2 = add(p + "mes.b2", 1, h);
      L.node_w1 = add(p + "node.w1", 2 * h, h);
      L.node_b1 = add(p + "node.b1", 1, h);
      L.node_w2 = add(p + "node.w2", h, h);
      L.node_b2 = add(p + "node.b2", 1, h);
      L.coord_w1 = add(p + "coord.w1", h, h);
      L.coord_b1 = add(p + "coord.b1", 1, h);
      L.coord_w2 = add(p + "coord.w2", h, 1);
      L.coord_b2 = add(p + "coord.b2", 1, 1);
      layers_.push_back(L);
    }
    type_head_ = {add("head.type.w1", h, h), add("head.type.b1", 1, h), add("head.type.w2", h, cfg.n_types),
                  add("head.type.b2", 1, cfg.n_types)};
    id_head_ = {add("head.id.w1", h, h), add("head.id.b1", 1, h), add("head.id.w2", h, cfg.id_dim()),
                add("head.id.b2", 1, cfg.id_dim())};
    data_.assign(total_, 0.0);
  }

  const DenoiserConfig& config() const { return cfg_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t size() const { return data_.size(); }

  Eigen::Map<RowMat> mat(std::size_t b) {
    const auto& pb = blocks_[b];
    return {data_.data() + pb.offset, static_cast<Eigen::Index>(pb.rows), static_cast<Eigen::Index>(pb.cols)};
  }
  Eigen::Map<const RowMat> mat(std::size_t b) const {
    const auto& pb = blocks_[b];
    return {data_.data() + pb.offset, static_cast<Eigen::Index>(pb.rows), static_cast<Eigen::Index>(pb.cols)};
  }
  Eigen::Map<Eigen::RowVectorXd> row(std::size_t b) {
    return {data_.data() + blocks_[b].offset, static_cast<Eigen::Index>(blocks_[b].size())};
  }
  Eigen::Map<const Eigen::RowVectorXd> row(std::size_t b) const {
    return {data_.data() + blocks_[b].offset, static_cast<Eigen::Index>(blocks_[b].size())};
  }

  std::size_t atom_w() const { return atom_w_; }
  std::size_t atom_b() const { return atom_b_; }
  std::size_t motif_w() const { return motif_w_; }
  std::size_t motif_b() const { return motif_b_; }
  std::size_t cond_w() const { return cond_w_; }
  std::size_t cond_b() const { return cond_b_; }
  std::size_t topo_ligand() const { return topo_lig_; }
  std::size_t topo_pocket() const { return topo_cond_; }
  std::size_t null_embedding() const { return null_; }
  const Layer& layer(std::size_t l) const { return layers_[l]; }
  const Head& type_head() const { return type_head_; }
  const Head& id_head() const { return id_head_; }

  DenoiserParams zeros_like() const {
    DenoiserParams z = *this;
    std::fill(z.data_.begin(), z.data_.end(), 0.0);
    return z;
  }

  // Weights ~ N(0, 1/fan_in), biases zero, final coordinate layer zero so the
  // untrained network leaves coordinates in place.
  void initialize(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::fill(data_.begin(), data_.end(), 0.0);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& pb = blocks_[b];
      const bool bias = pb.rows == 1 && pb.name != "embed.null";
      const bool coord_out = pb.name.find("coord.w2") != std::string::npos;
      if (bias || coord_out) continue;
      const double sd = pb.name == "embed.null" ? 1.0 : 1.0 / std::sqrt(static_cast<double>(pb.rows));
      for (std::size_t i = 0; i < pb.size(); ++i) data_[pb.offset + i] = sd * g(rng);
    }
  }

  // Every entry random, including the zero-initialized ones.
  void randomize(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (const auto& pb : blocks_) {
      const double sd = scale / std::sqrt(static_cast<double>(std::max<std::size_t>(pb.rows, 1)));
      for (std::size_t i = 0; i < pb.size(); ++i) data_[pb.offset + i] = sd * g(rng);
    }
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

private:
  std::size_t add(const std::string& name, std::size_t rows, std::size_t cols) {
    blocks_.push_back({name, total_, rows, cols});
    total_ += rows * cols;
    return blocks_.size() - 1;
  }

  DenoiserConfig cfg_;
  std::vector<double> data_;
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
  std::size_t atom_w_ = 0, atom_b_ = 0, motif_w_ = 0, motif_b_ = 0, cond_w_ = 0, cond_b_ = 0;
  std::size_t topo_lig_ = 0, topo_cond_ = 0, null_ = 0;
  std::vector<Layer> layers_;
  Head type_head_{}, id_head_{};
};

}  // namespace amdiff::denoiser
