#include "h2spec/gldl.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "h2spec/errors.hpp"

namespace h2spec {

Matrix skeletonize_dense(const Matrix& block, const BasisSplit& row, const BasisSplit& col) {
  return row.ordered().transpose() * block * col.ordered();
}

Matrix skeletonize_lowrank(const Matrix& coupling, int row_redundant, int col_redundant) {
  Matrix m = Matrix::Zero(row_redundant + coupling.rows(), col_redundant + coupling.cols());
  m.bottomRightCorner(coupling.rows(), coupling.cols()) = coupling;
  return m;
}

RedundantFactor factor_redundant(const Matrix& skeleton, int r, double scale) {
  const Eigen::Index d = skeleton.rows();
  const Eigen::Index s = d - r;
  RedundantFactor f;
  f.rr = ldl_symmetric(skeleton.topLeftCorner(r, r), scale);
  Matrix Y(s, r);
  for (int i = 0; i < r; ++i) Y.col(i) = skeleton.bottomLeftCorner(s, r).col(f.rr.perm[i]);
  Matrix Xt = Y.transpose();
  f.rr.L.triangularView<Eigen::UnitLower>().solveInPlace(Xt);
  Matrix V = Xt;
  f.rr.apply_d_inverse(V);
  f.L_sr = V.transpose();
  f.schur = skeleton.bottomRightCorner(s, s) - Xt.transpose() * V;
  f.schur = 0.5 * (f.schur + f.schur.transpose()).eval();
  return f;
}

BlockEntry* LevelSystem::find(int i, int j) {
  auto& row = rows[i];
  auto it = std::lower_bound(row.begin(), row.end(), j, [](const BlockEntry& e, int c) { return e.col < c; });
  return (it != row.end() && it->col == j) ? &*it : nullptr;
}

const BlockEntry* LevelSystem::find(int i, int j) const {
  return const_cast<LevelSystem*>(this)->find(i, j);
}

BlockEntry& LevelSystem::get_or_create(int i, int j, BlockKind kind) {
  auto& row = rows[i];
  auto it = std::lower_bound(row.begin(), row.end(), j, [](const BlockEntry& e, int c) { return e.col < c; });
  if (it != row.end() && it->col == j) return *it;
  BlockEntry e;
  e.col = j;
  e.kind = kind;
  e.m = Matrix::Zero(clusters[i].dim(), clusters[j].dim());
  return *row.insert(it, std::move(e));
}

std::vector<std::pair<int, int>> LevelSystem::fill_pairs() const {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& e : rows[i])
      if (e.kind != BlockKind::Near) {
        const auto& ci = clusters[i];
        const auto& cj = clusters[e.col];
        // a fill-in shows up as nonzero data outside the S x S quadrant
        const bool outside = e.m.topRows(ci.eliminated ? 0 : ci.r).cwiseAbs().sum() > 0 ||
                             e.m.leftCols(cj.eliminated ? 0 : cj.r).cwiseAbs().sum() > 0;
        if (e.kind == BlockKind::Fill || outside) out.emplace_back(static_cast<int>(i), e.col);
      }
  return out;
}

GldlEngine::GldlEngine(const RankStructuredMatrix& H, double shift, const GldlOptions& opt)
    : H_(H), opt_(opt), shift_(shift) {
  scale_ = H.scale + std::abs(H.shift) + std::abs(shift);
  tol_ = opt.recompress_tol >= 0 ? opt.recompress_tol : H.eps * std::min(1.0, scale_);
  lstar_ = H.structure.coarsest_lowrank_level();
  out_.n = H.n();
  out_.shift = H.shift + shift;
  out_.recorded = opt.record_factors;
}

void GldlEngine::record(std::vector<int> slots, Matrix F) {
  if (!opt_.record_factors) return;
  out_.steps.push_back({std::move(slots), std::move(F)});
}

void GldlEngine::init_leaf_level() {
  const int L = H_.depth();
  const int nc = H_.tree.clusters(L);
  sys_ = LevelSystem{};
  sys_.level = L;
  sys_.clusters.resize(nc);
  sys_.rows.resize(nc);
  root_ = false;
  for (int i = 0; i < nc; ++i) {
    const auto& nd = H_.tree.node(L, i);
    auto& c = sys_.clusters[i];
    c.slots.resize(nd.size());
    std::iota(c.slots.begin(), c.slots.end(), nd.begin);
    const int rank = H_.rank(L, i);
    c.r = nd.size() - rank;
    c.s = c.s0 = rank;
    if (H_.has_basis(L)) record(c.slots, H_.bases[L][i].ordered());
  }
  for (const auto& [key, S] : H_.skeleton) {
    const auto [i, j] = key;
    auto& e = sys_.get_or_create(i, j, BlockKind::Near);
    e.m = S;
    if (i == j) {
      e.m.diagonal().array() -= shift_;
    } else {
      sys_.get_or_create(j, i, BlockKind::Near).m = S.transpose();
    }
  }
  if (H_.has_basis(L)) {
    for (const auto& [key, C] : H_.couplings[L]) {
      const auto [i, j] = key;
      Matrix m = skeletonize_lowrank(C, sys_.clusters[i].r, sys_.clusters[j].r);
      sys_.get_or_create(j, i, BlockKind::LowRank).m = m.transpose();
      sys_.get_or_create(i, j, BlockKind::LowRank).m = std::move(m);
    }
  }
  LevelStats st;
  st.level = L;
  for (const auto& c : sys_.clusters) st.max_skeleton = std::max(st.max_skeleton, c.s);
  out_.levels.push_back(st);
}

void GldlEngine::recompress_fillins(int k) {
  auto& ck = sys_.clusters[k];
  ck.has_fill = false;
  const int r = ck.r;
  if (r == 0) return;
  std::vector<BlockEntry*> far;
  Eigen::Index width = 0;
  auto active = [&](int c) -> std::pair<int, int> {
    const auto& cc = sys_.clusters[c];
    return cc.eliminated ? std::pair{cc.r, cc.s} : std::pair{0, cc.dim()};
  };
  for (auto& e : sys_.rows[k])
    if (e.kind != BlockKind::Near) {
      far.push_back(&e);
      width += active(e.col).second;
    }
  if (width == 0) return;
  Matrix C(r, width);
  Eigen::Index at = 0;
  for (auto* e : far) {
    const auto [off, cnt] = active(e->col);
    C.middleCols(at, cnt) = e->m.block(0, off, r, cnt);
    at += cnt;
  }
  const BasisSplit split = rrqr_absolute(C, tol_);
  const int z = split.rank;
  ++out_.levels.back().recompressions;

  const int d = ck.dim(), s = ck.s;
  // New coordinate order [Z_perp^T R; S; Z^T R]; only the R rows mix.
  auto rows_of = [&](const Matrix& m, bool keep_dropped) {
    Matrix t(d, m.cols());
    if (keep_dropped) {
      t.topRows(r - z).noalias() = split.U_R.transpose() * m.topRows(r);
    } else {
      t.topRows(r - z).setZero();
    }
    t.middleRows(r - z, s) = m.middleRows(r, s);
    t.bottomRows(z).noalias() = split.U_S.transpose() * m.topRows(r);
    return t;
  };
  for (auto& e : sys_.rows[k]) {
    const bool far_block = e.kind != BlockKind::Near;
    if (e.col == k) {
      Matrix t = rows_of(e.m, true);
      e.m = rows_of(t.transpose(), true);
      e.m = 0.5 * (e.m + e.m.transpose()).eval();
    } else {
      // far blocks lose what the new skeleton does not capture
      e.m = rows_of(e.m, !far_block);
      sys_.find(e.col, k)->m = e.m.transpose();
    }
  }
  if (opt_.record_factors) {
    Matrix T = Matrix::Zero(d, d);
    T.block(0, 0, r - z, r) = split.U_R.transpose();
    T.block(r - z, r, s, s).setIdentity();
    T.block(r - z + s, 0, z, r) = split.U_S.transpose();
    record(ck.slots, T.transpose());
  }
  ck.r = r - z;
  ck.s += z;
  out_.levels.back().max_skeleton = std::max(out_.levels.back().max_skeleton, ck.s);
}

void GldlEngine::eliminate(int k) {
  auto& ck = sys_.clusters[k];
  if (ck.eliminated) return;
  if (ck.has_fill) recompress_fillins(k);
  const int r = ck.r;
  if (r == 0) {
    ck.eliminated = true;
    return;
  }

  struct Seg {
    int c, off, cnt;
  };
  std::vector<Seg> segs;
  if (ck.s > 0) segs.push_back({k, r, ck.s});
  for (const auto& e : sys_.rows[k]) {
    if (e.kind != BlockKind::Near || e.col == k) continue;
    const auto& cc = sys_.clusters[e.col];
    const Seg sg = cc.eliminated ? Seg{e.col, cc.r, cc.s} : Seg{e.col, 0, cc.dim()};
    if (sg.cnt > 0) segs.push_back(sg);
  }
  std::vector<int> start(segs.size() + 1, 0);
  for (std::size_t a = 0; a < segs.size(); ++a) start[a + 1] = start[a] + segs[a].cnt;
  const int total = start.back();

  const Matrix& Akk = sys_.find(k, k)->m;
  LdlResult f = ldl_symmetric(Akk.topLeftCorner(r, r), scale_);
  out_.inertia += inertia_of(f);

  Matrix Xt(r, total);
  for (std::size_t a = 0; a < segs.size(); ++a) {
    const Matrix& B = sys_.find(k, segs[a].c)->m;
    for (int i = 0; i < r; ++i)
      Xt.block(i, start[a], 1, segs[a].cnt) = B.block(f.perm[i], segs[a].off, 1, segs[a].cnt);
  }
  f.L.triangularView<Eigen::UnitLower>().solveInPlace(Xt);
  Matrix V = Xt;
  f.apply_d_inverse(V);

  Matrix full(total, total);
  full.noalias() = Xt.transpose() * V;
  for (std::size_t a = 0; a < segs.size(); ++a) {
    const Seg& sa = segs[a];
    for (std::size_t b = a; b < segs.size(); ++b) {
      const Seg& sb = segs[b];
      const auto U = full.block(start[a], start[b], sa.cnt, sb.cnt);
      BlockEntry* e = sys_.find(sa.c, sb.c);
      if (!e) {
        sys_.get_or_create(sb.c, sa.c, BlockKind::Fill);
        e = &sys_.get_or_create(sa.c, sb.c, BlockKind::Fill);
        ++out_.levels.back().fill_blocks;
      }
      if (a == b) {
        e->m.block(sa.off, sb.off, sa.cnt, sb.cnt) -= 0.5 * (U + U.transpose());
        continue;
      }
      e->m.block(sa.off, sb.off, sa.cnt, sb.cnt) -= U;
      sys_.find(sb.c, sa.c)->m.block(sb.off, sa.off, sb.cnt, sa.cnt) -= U.transpose();
      if (e->kind != BlockKind::Near) {
        auto& ca = sys_.clusters[sa.c];
        auto& cb = sys_.clusters[sb.c];
        if (sa.off == 0 && ca.r > 0) ca.has_fill = true;
        if (sb.off == 0 && cb.r > 0) cb.has_fill = true;
      }
    }
  }

  std::vector<int> rslots(ck.slots.begin(), ck.slots.begin() + r);
  if (opt_.record_factors) {
    std::vector<int> slots = rslots;
    for (const auto& sg : segs)
      for (int t = 0; t < sg.cnt; ++t) slots.push_back(sys_.clusters[sg.c].slots[sg.off + t]);
    Matrix F = Matrix::Zero(r + total, r + total);
    for (int i = 0; i < r; ++i) F.block(f.perm[i], 0, 1, r) = f.L.row(i);
    F.bottomLeftCorner(total, r) = V.transpose();
    F.bottomRightCorner(total, total).setIdentity();
    record(std::move(slots), std::move(F));
  } else {
    f.L.resize(0, 0);
  }
  out_.pivots.push_back({sys_.level, k, std::move(rslots), std::move(f)});
  ck.eliminated = true;
}

void GldlEngine::merge_permute() {
  const LevelSystem child = std::move(sys_);
  const int L = child.level;
  const bool to_root = lstar_ < 0 || L <= lstar_ || L - 1 == 0;
  const int plevel = to_root ? 0 : L - 1;
  const int np = to_root ? 1 : H_.tree.clusters(L - 1);
  const int nc = static_cast<int>(child.clusters.size());
  auto group = [&](int c) { return to_root ? 0 : c / 2; };
  const bool with_basis = !to_root && H_.has_basis(plevel);

  LevelSystem par;
  par.level = plevel;
  par.clusters.resize(np);
  par.rows.resize(np);
  std::vector<int> off(nc, 0), dsum(np, 0);
  for (int c = 0; c < nc; ++c) {
    const auto& cc = child.clusters[c];
    const int I = group(c);
    off[c] = dsum[I];
    dsum[I] += cc.s;
    auto& slots = par.clusters[I].slots;
    slots.insert(slots.end(), cc.slots.begin() + cc.r, cc.slots.end());
  }

  std::vector<Matrix> Q(np);
  for (int I = 0; I < np; ++I) {
    auto& pc = par.clusters[I];
    if (!with_basis) {
      pc.r = dsum[I];
      pc.s = pc.s0 = 0;
      continue;
    }
    const BasisSplit& b = H_.bases[plevel][I];
    const int rank = b.rank;
    const int n0 = static_cast<int>(b.U_S.rows());
    const int extra = dsum[I] - n0;
    Matrix& q = Q[I];
    q = Matrix::Zero(dsum[I], dsum[I]);
    int brow = 0, ecol = n0 - rank;
    for (int c = 2 * I; c <= 2 * I + 1; ++c) {
      const auto& cc = child.clusters[c];
      q.block(off[c], 0, cc.s0, n0 - rank) = b.U_R.middleRows(brow, cc.s0);
      q.block(off[c], n0 - rank + extra, cc.s0, rank) = b.U_S.middleRows(brow, cc.s0);
      for (int t = cc.s0; t < cc.s; ++t) q(off[c] + t, ecol++) = 1.0;
      brow += cc.s0;
    }
    pc.r = dsum[I] - rank;
    pc.s = pc.s0 = rank;
    record(pc.slots, q);
  }

  std::map<BlockKey, Matrix> B;
  std::map<BlockKey, bool> has_fill_data;
  for (int c = 0; c < nc; ++c) {
    const int sc = child.clusters[c].s;
    if (sc == 0) continue;
    for (const auto& e : child.rows[c]) {
      const int sd = child.clusters[e.col].s;
      if (sd == 0) continue;
      const BlockKey key{group(c), group(e.col)};
      if (key.first > key.second) continue;
      auto it = B.find(key);
      if (it == B.end()) it = B.emplace(key, Matrix::Zero(dsum[key.first], dsum[key.second])).first;
      it->second.block(off[c], off[e.col], sc, sd) += e.m.bottomRightCorner(sc, sd);
      if (e.kind == BlockKind::Fill) has_fill_data[key] = true;
    }
  }

  auto kind_of = [&](int I, int J) {
    if (to_root || H_.structure.is_near(plevel, I, J)) return BlockKind::Near;
    if (H_.structure.is_far(plevel, I, J)) return BlockKind::LowRank;
    return BlockKind::Fill;
  };
  auto transform = [&](int I, int J, const Matrix& m) -> Matrix {
    if (!with_basis) return m;
    return Q[I].transpose() * m * Q[J];
  };
  auto put = [&](int I, int J, BlockKind kind, Matrix m) {
    if (I == J) m = 0.5 * (m + m.transpose()).eval();
    par.get_or_create(I, J, kind).m = m;
    if (I != J) par.get_or_create(J, I, kind).m = m.transpose();
  };

  for (auto& [key, m] : B) {
    const auto [I, J] = key;
    const BlockKind kind = kind_of(I, J);
    Matrix t = transform(I, J, m);
    if (kind == BlockKind::LowRank)
      t += skeletonize_lowrank(H_.coupling(plevel, I, J), par.clusters[I].r, par.clusters[J].r);
    if (kind != BlockKind::Near && has_fill_data.count(key)) {
      if (par.clusters[I].r > 0) par.clusters[I].has_fill = true;
      if (par.clusters[J].r > 0) par.clusters[J].has_fill = true;
    }
    put(I, J, kind, std::move(t));
  }
  if (with_basis) {
    for (const auto& [key, S] : H_.couplings[plevel]) {
      if (B.count(key)) continue;
      const auto [I, J] = key;
      put(I, J, BlockKind::LowRank, skeletonize_lowrank(S, par.clusters[I].r, par.clusters[J].r));
    }
  }
  for (int I = 0; I < np; ++I)
    if (!par.find(I, I) && par.clusters[I].dim() > 0)
      par.get_or_create(I, I, BlockKind::Near);

  sys_ = std::move(par);
  root_ = to_root;
  LevelStats st;
  st.level = plevel;
  for (const auto& c : sys_.clusters) st.max_skeleton = std::max(st.max_skeleton, c.s);
  out_.levels.push_back(st);
}

void GldlEngine::factor_root() {
  if (!root_) throw std::logic_error("factor_root called before reaching the root");
  eliminate(0);
}

GldlFactorization GldlEngine::run() {
  init_leaf_level();
  for (;;) {
    for (int k = 0; k < static_cast<int>(sys_.clusters.size()); ++k) eliminate(k);
    if (root_) break;
    merge_permute();
  }
  if (out_.inertia.size() != out_.n)
    throw std::logic_error("generalized_ldl: inertia does not account for every coordinate");
  return std::move(out_);
}

GldlFactorization generalized_ldl(const RankStructuredMatrix& H, double shift, const GldlOptions& opt) {
  GldlEngine engine(H, shift, opt);
  return engine.run();
}

Matrix reconstruct_factorization(const GldlFactorization& f) {
  if (!f.recorded) throw std::invalid_argument("reconstruct_factorization: factors were not recorded");
  Matrix M = Matrix::Zero(f.n, f.n);
  for (const auto& p : f.pivots) {
    const Matrix D = p.ldl.block_diagonal();
    for (std::size_t a = 0; a < p.slots.size(); ++a)
      for (std::size_t b = 0; b < p.slots.size(); ++b) M(p.slots[a], p.slots[b]) = D(a, b);
  }
  for (auto it = f.steps.rbegin(); it != f.steps.rend(); ++it) {
    const auto& s = it->slots;
    const Eigen::Index m = static_cast<Eigen::Index>(s.size());
    Matrix rows(m, f.n);
    for (Eigen::Index a = 0; a < m; ++a) rows.row(a) = M.row(s[a]);
    rows = (it->F * rows).eval();
    for (Eigen::Index a = 0; a < m; ++a) M.row(s[a]) = rows.row(a);
    Matrix cols(f.n, m);
    for (Eigen::Index a = 0; a < m; ++a) cols.col(a) = M.col(s[a]);
    cols = (cols * it->F.transpose()).eval();
    for (Eigen::Index a = 0; a < m; ++a) M.col(s[a]) = cols.col(a);
  }
  return M;
}

InertiaCount inertia(const RankStructuredMatrix& H, double mu) {
  double mu_used = mu;
  for (int attempt = 0;; ++attempt) {
    try {
      const GldlFactorization f = generalized_ldl(H, mu_used);
      return {f.inertia.neg, f.inertia.zero, f.inertia.pos, mu_used, attempt};
    } catch (const Breakdown&) {
      if (attempt == 3)
        throw InertiaUnstable("inertia: breakdown persists after 3 shifted retries near mu = " +
                              std::to_string(mu));
      const double d = 1e-11 * std::max(1.0, std::abs(mu_used));
      mu_used = mu_used * (1.0 + d) + d;
    }
  }
}

void dump_factorization(std::ostream& out, const GldlFactorization& f) {
  const auto old = out.precision(17);
  for (const auto& st : f.levels)
    out << "{\"type\":\"level\",\"level\":" << st.level << ",\"max_skeleton\":" << st.max_skeleton
        << ",\"recompressions\":" << st.recompressions << ",\"fill_blocks\":" << st.fill_blocks << "}\n";
  for (const auto& p : f.pivots) {
    out << "{\"type\":\"pivots\",\"level\":" << p.level << ",\"cluster\":" << p.cluster
        << ",\"redundant\":" << p.ldl.size() << ",\"d\":[";
    for (int i = 0; i < p.ldl.size(); ++i) out << (i ? "," : "") << p.ldl.diag[i];
    out << "],\"sub\":[";
    for (int i = 0; i < p.ldl.size(); ++i) out << (i ? "," : "") << p.ldl.sub[i];
    out << "]}\n";
  }
  out << "{\"type\":\"inertia\",\"neg\":" << f.inertia.neg << ",\"zero\":" << f.inertia.zero
      << ",\"pos\":" << f.inertia.pos << "}\n";
  out.precision(old);
}

}  // namespace h2spec
