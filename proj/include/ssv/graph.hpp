#pragma once

// Uncertainty structures given by complete-bipartite graph components.
//
// Component k has n_k source vertices, m_k range vertices and a coefficient
// space of dimension d_k. The source space is the direct sum over k of
// C^{n_k} (x) C^{d_k} with the coefficient index running fastest; the range
// space is built the same way from m_k. A structured perturbation maps the
// range space back into the source space and has the form
// diag_k(W_k (x) I_{d_k}).
//
// Enhanced (level q) spaces are C^q (x) H with the q index outermost for the
// whole space, so slot t of a level-q source vector occupies entries
// [t * sourceDim, (t + 1) * sourceDim). A level-q block W_k is stored as an
// (q n_k) x (q m_k) matrix whose row index is t * n_k + i.

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ssv/linalg.hpp"

namespace ssv {

struct Component {
  std::string name;
  int sources = 1;       // n_k
  int ranges = 1;        // m_k
  int multiplicity = 1;  // d_k

  int sourceExtent() const { return sources * multiplicity; }
  int rangeExtent() const { return ranges * multiplicity; }
  /// n = m = 1 with d >= 2: the repeated-scalar block delta * I_d.
  bool isRepeatedScalar() const { return sources == 1 && ranges == 1 && multiplicity >= 2; }
  bool isFull() const { return multiplicity == 1; }
};

class StructureGraph {
 public:
  StructureGraph() = default;

  explicit StructureGraph(std::vector<Component> components) : components_(std::move(components)) {
    require(!components_.empty(), "graph: component list must be nonempty");
    std::set<std::string> names;
    for (const auto& c : components_) {
      require(c.sources >= 1 && c.ranges >= 1 && c.multiplicity >= 1,
              "graph: component '" + c.name + "' needs sources, ranges, multiplicity >= 1");
      require(names.insert(c.name).second, "graph: duplicate component name '" + c.name + "'");
      sourceDim_ += c.sourceExtent();
      rangeDim_ += c.rangeExtent();
    }
  }

  const std::vector<Component>& components() const { return components_; }
  int size() const { return static_cast<int>(components_.size()); }
  const Component& operator[](int k) const { return components_.at(k); }
  int sourceDim() const { return sourceDim_; }
  int rangeDim() const { return rangeDim_; }

  /// Number of complex entries across all W_k at level 1.
  int parameterCount() const {
    int n = 0;
    for (const auto& c : components_) n += c.sources * c.ranges;
    return n;
  }

  bool operator==(const StructureGraph& o) const {
    if (components_.size() != o.components_.size()) return false;
    for (std::size_t k = 0; k < components_.size(); ++k) {
      const auto& a = components_[k];
      const auto& b = o.components_[k];
      if (a.name != b.name || a.sources != b.sources || a.ranges != b.ranges || a.multiplicity != b.multiplicity)
        return false;
    }
    return true;
  }

 private:
  std::vector<Component> components_;
  int sourceDim_ = 0;
  int rangeDim_ = 0;
};

/// Convenience constructors used throughout tests and the corpus.
inline Component fullBlock(std::string name, int sources, int ranges) { return {std::move(name), sources, ranges, 1}; }
inline Component scalarBlock(std::string name, int multiplicity) { return {std::move(name), 1, 1, multiplicity}; }

/// Offsets of each component inside the source and range spaces, plus the
/// canonical embeddings iota_s / iota_r as explicit 0/1 matrices.
class BlockLayout {
 public:
  explicit BlockLayout(const StructureGraph& g) : graph_(g) {
    int s = 0;
    int r = 0;
    for (const auto& c : g.components()) {
      srcOffset_.push_back(s);
      rngOffset_.push_back(r);
      s += c.sourceExtent();
      r += c.rangeExtent();
    }
  }

  const StructureGraph& graph() const { return graph_; }
  int sourceDim() const { return graph_.sourceDim(); }
  int rangeDim() const { return graph_.rangeDim(); }
  int sourceOffset(int k) const { return srcOffset_.at(k); }
  int rangeOffset(int k) const { return rngOffset_.at(k); }
  int sourceExtent(int k) const { return graph_[k].sourceExtent(); }
  int rangeExtent(int k) const { return graph_[k].rangeExtent(); }

  /// iota_s for source vertex i of component k: embeds C^{d_k} into H_S.
  Mat iotaSource(int k, int i) const {
    const auto& c = graph_[k];
    require(i >= 0 && i < c.sources, "iotaSource: vertex index out of range");
    Mat e = Mat::Zero(sourceDim(), c.multiplicity);
    for (int a = 0; a < c.multiplicity; ++a) e(sourceOffset(k) + i * c.multiplicity + a, a) = 1.0;
    return e;
  }

  Mat iotaRange(int k, int j) const {
    const auto& c = graph_[k];
    require(j >= 0 && j < c.ranges, "iotaRange: vertex index out of range");
    Mat e = Mat::Zero(rangeDim(), c.multiplicity);
    for (int a = 0; a < c.multiplicity; ++a) e(rangeOffset(k) + j * c.multiplicity + a, a) = 1.0;
    return e;
  }

  /// Orthogonal projection of H_S onto H_{S,k}, as a selector (extent x sourceDim).
  Mat sourceSelector(int k) const {
    Mat p = Mat::Zero(sourceExtent(k), sourceDim());
    for (int a = 0; a < sourceExtent(k); ++a) p(a, sourceOffset(k) + a) = 1.0;
    return p;
  }

  Mat rangeSelector(int k) const {
    Mat p = Mat::Zero(rangeExtent(k), rangeDim());
    for (int a = 0; a < rangeExtent(k); ++a) p(a, rangeOffset(k) + a) = 1.0;
    return p;
  }

  /// Component-k part of a level-q source vector, ordered (slot, vertex, coefficient).
  Vec extractSource(const Vec& h, int k, int q = 1) const {
    return extract(h, sourceDim(), sourceOffset(k), sourceExtent(k), q);
  }
  Vec extractRange(const Vec& h, int k, int q = 1) const {
    return extract(h, rangeDim(), rangeOffset(k), rangeExtent(k), q);
  }

  /// Inverse of extractSource: writes the component-k part back into `h`.
  void scatterSource(Vec& h, int k, const Vec& part, int q = 1) const {
    scatter(h, sourceDim(), sourceOffset(k), sourceExtent(k), part, q);
  }
  void scatterRange(Vec& h, int k, const Vec& part, int q = 1) const {
    scatter(h, rangeDim(), rangeOffset(k), rangeExtent(k), part, q);
  }

 private:
  static Vec extract(const Vec& h, int dim, int offset, int extent, int q) {
    require(h.size() == static_cast<Eigen::Index>(dim) * q, "layout: vector length does not match q * dimension");
    Vec out(static_cast<Eigen::Index>(extent) * q);
    for (int t = 0; t < q; ++t) out.segment(t * extent, extent) = h.segment(t * dim + offset, extent);
    return out;
  }
  static void scatter(Vec& h, int dim, int offset, int extent, const Vec& part, int q) {
    require(h.size() == static_cast<Eigen::Index>(dim) * q, "layout: vector length does not match q * dimension");
    require(part.size() == static_cast<Eigen::Index>(extent) * q, "layout: component part has wrong length");
    for (int t = 0; t < q; ++t) h.segment(t * dim + offset, extent) = part.segment(t * extent, extent);
  }

  StructureGraph graph_;
  std::vector<int> srcOffset_;
  std::vector<int> rngOffset_;
};

inline BlockLayout buildLayout(const StructureGraph& g) { return BlockLayout(g); }

/// Delta = diag_k(W_k (x) I_{d_k}) at enhancement level q.
class StructuredPerturbation {
 public:
  StructuredPerturbation() = default;

  StructuredPerturbation(StructureGraph g, std::vector<Mat> blocks, int level = 1)
      : graph_(std::move(g)), blocks_(std::move(blocks)), level_(level) {
    require(level_ >= 1, "perturbation: enhancement level must be >= 1");
    require(static_cast<int>(blocks_.size()) == graph_.size(), "perturbation: need one block per component");
    for (int k = 0; k < graph_.size(); ++k) {
      const auto& c = graph_[k];
      require(blocks_[k].rows() == c.sources * level_ && blocks_[k].cols() == c.ranges * level_,
              "perturbation: block '" + c.name + "' must be (n_k q) x (m_k q) = " +
                  std::to_string(c.sources * level_) + "x" + std::to_string(c.ranges * level_));
    }
  }

  const StructureGraph& graph() const { return graph_; }
  const std::vector<Mat>& blocks() const { return blocks_; }
  const Mat& block(int k) const { return blocks_.at(k); }
  int level() const { return level_; }

  /// Dense (q sourceDim) x (q rangeDim) matrix.
  Mat dense() const {
    BlockLayout lay(graph_);
    const int S = graph_.sourceDim();
    const int R = graph_.rangeDim();
    Mat d = Mat::Zero(static_cast<Eigen::Index>(S) * level_, static_cast<Eigen::Index>(R) * level_);
    for (int k = 0; k < graph_.size(); ++k) {
      const auto& c = graph_[k];
      const Mat& w = blocks_[k];
      for (int t = 0; t < level_; ++t)
        for (int i = 0; i < c.sources; ++i)
          for (int u = 0; u < level_; ++u)
            for (int j = 0; j < c.ranges; ++j) {
              const cplx v = w(t * c.sources + i, u * c.ranges + j);
              if (v == cplx(0.0)) continue;
              for (int a = 0; a < c.multiplicity; ++a)
                d(t * S + lay.sourceOffset(k) + i * c.multiplicity + a,
                  u * R + lay.rangeOffset(k) + j * c.multiplicity + a) = v;
            }
    }
    return d;
  }

  /// Equals opNorm(dense()) by the block-diagonal norm identity.
  double norm() const {
    double n = 0.0;
    for (const auto& b : blocks_) n = std::max(n, opNorm(b));
    return n;
  }

  StructuredPerturbation scaled(cplx s) const {
    std::vector<Mat> b = blocks_;
    for (auto& w : b) w *= s;
    return {graph_, std::move(b), level_};
  }

 private:
  StructureGraph graph_;
  std::vector<Mat> blocks_;
  int level_ = 1;
};

inline StructuredPerturbation assemblePerturbation(const StructureGraph& g, std::vector<Mat> blocks, int level = 1) {
  return {g, std::move(blocks), level};
}

/// Zero perturbation with the right block shapes.
inline StructuredPerturbation zeroPerturbation(const StructureGraph& g, int level = 1) {
  std::vector<Mat> b;
  for (const auto& c : g.components()) b.push_back(Mat::Zero(c.sources * level, c.ranges * level));
  return {g, std::move(b), level};
}

/// Reads the blocks W_k back out of a dense matrix (no structure check).
inline std::vector<Mat> extractBlocks(const StructureGraph& g, const Mat& dense, int level = 1) {
  BlockLayout lay(g);
  const int S = g.sourceDim();
  const int R = g.rangeDim();
  std::vector<Mat> out;
  for (int k = 0; k < g.size(); ++k) {
    const auto& c = g[k];
    Mat w(c.sources * level, c.ranges * level);
    for (int t = 0; t < level; ++t)
      for (int i = 0; i < c.sources; ++i)
        for (int u = 0; u < level; ++u)
          for (int j = 0; j < c.ranges; ++j)
            w(t * c.sources + i, u * c.ranges + j) =
                dense(t * S + lay.sourceOffset(k) + i * c.multiplicity, u * R + lay.rangeOffset(k) + j * c.multiplicity);
    out.push_back(std::move(w));
  }
  return out;
}

/// Relative distance of `dense` from the structure: re-assembles from the
/// extracted blocks and compares. Zero exactly when `dense` is structured.
inline double structureDefect(const StructureGraph& g, const Mat& dense, int level = 1) {
  if (dense.rows() != static_cast<Eigen::Index>(g.sourceDim()) * level ||
      dense.cols() != static_cast<Eigen::Index>(g.rangeDim()) * level)
    return std::numeric_limits<double>::infinity();
  Mat rebuilt = StructuredPerturbation(g, extractBlocks(g, dense, level), level).dense();
  return (rebuilt - dense).norm() / std::max(1.0, dense.norm());
}

/// Intertwining pair (X, Y): X = sum_k I_{m_k} (x) Gamma_k on the range space,
/// Y = sum_k I_{n_k} (x) Gamma_k on the source space, so Delta X = Y Delta.
struct ScalingPair {
  std::vector<Mat> gammas;
  Mat X;
  Mat Y;
};

inline ScalingPair assembleScaling(const StructureGraph& g, std::vector<Mat> gammas) {
  require(static_cast<int>(gammas.size()) == g.size(), "scaling: need one Gamma per component");
  ScalingPair out;
  out.X = Mat::Zero(g.rangeDim(), g.rangeDim());
  out.Y = Mat::Zero(g.sourceDim(), g.sourceDim());
  BlockLayout lay(g);
  for (int k = 0; k < g.size(); ++k) {
    const auto& c = g[k];
    const Mat& gk = gammas[k];
    require(gk.rows() == c.multiplicity && gk.cols() == c.multiplicity,
            "scaling: Gamma for '" + c.name + "' must be d_k x d_k");
    require(hermitianDefect(gk) <= 1e-12, "scaling: Gamma for '" + c.name + "' is not Hermitian");
    const Mat gh = herm(gk);
    for (int j = 0; j < c.ranges; ++j)
      out.X.block(lay.rangeOffset(k) + j * c.multiplicity, lay.rangeOffset(k) + j * c.multiplicity, c.multiplicity,
                  c.multiplicity) = gh;
    for (int i = 0; i < c.sources; ++i)
      out.Y.block(lay.sourceOffset(k) + i * c.multiplicity, lay.sourceOffset(k) + i * c.multiplicity, c.multiplicity,
                  c.multiplicity) = gh;
  }
  out.gammas = std::move(gammas);
  return out;
}

inline std::vector<Mat> identityGammas(const StructureGraph& g, double scale = 1.0) {
  std::vector<Mat> out;
  for (const auto& c : g.components()) out.push_back(identity(c.multiplicity) * scale);
  return out;
}

/// Appends a full multiplicity-one block with `inDim` sources and `outDim` ranges.
inline StructureGraph augmentWithFullBlock(const StructureGraph& g, int inDim, int outDim, std::string name = "") {
  require(inDim >= 1 && outDim >= 1, "augmentWithFullBlock: dimensions must be >= 1");
  std::vector<Component> comps = g.components();
  if (name.empty()) {
    name = "loop";
    std::set<std::string> taken;
    for (const auto& c : comps) taken.insert(c.name);
    int suffix = 0;
    while (taken.count(name)) name = "loop" + std::to_string(++suffix);
  }
  comps.push_back(fullBlock(std::move(name), inDim, outDim));
  return StructureGraph(std::move(comps));
}

/// Random structured perturbation with complex Gaussian blocks.
inline StructuredPerturbation randomPerturbation(const StructureGraph& g, CounterRng& rng, int level = 1) {
  std::vector<Mat> b;
  for (const auto& c : g.components()) b.push_back(randomComplex(c.sources * level, c.ranges * level, rng));
  return {g, std::move(b), level};
}

}  // namespace ssv
