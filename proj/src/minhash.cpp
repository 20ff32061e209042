#include "minsig/minhash.hpp"

#include <algorithm>
#include <limits>

#include "minsig/parallel.hpp"

namespace minsig {

namespace {

std::uint64_t table_key(TimeIndex time, std::uint32_t position) {
  return (static_cast<std::uint64_t>(time) << 32) | position;
}

constexpr std::size_t kTableBudgetBytes = std::size_t{64} << 20;
constexpr std::uint32_t kMaxBlock = 64;

}  // namespace

HashFamily::HashFamily(std::uint32_t hash_count, std::uint64_t master_seed, std::uint64_t range) {
  if (hash_count == 0) fail(ErrorCode::invalid_argument, "hash family needs at least one function");
  if (range == 0 || range > std::numeric_limits<HashValue>::max())
    fail(ErrorCode::invalid_argument, "hash range must lie in [1, 2^32)");
  header_ = {hash_count, master_seed, range, false};
  seeds_.resize(hash_count);
  for (std::uint32_t u = 0; u < hash_count; ++u) seeds_[u] = derive_seed(master_seed, "hash", u);
}

HashFamily HashFamily::from_table(const SpIndex& index,
                                  std::span<const std::pair<STCell, std::vector<HashValue>>> table) {
  if (table.empty()) fail(ErrorCode::invalid_argument, "empty hash table");
  HashFamily f;
  const auto n = table.front().second.size();
  if (n == 0) fail(ErrorCode::invalid_argument, "hash table rows need at least one value");
  HashValue top = 0;
  for (const auto& [cell, values] : table) {
    if (values.size() != n) fail(ErrorCode::invalid_argument, "ragged hash table");
    if (cell.unit >= index.unit_count() || !index.is_base(cell.unit))
      fail(ErrorCode::unknown_unit, "hash table entries must be base cells");
    for (auto v : values) top = std::max(top, v);
    f.table_[table_key(cell.time, index.base_position(cell.unit))] = values;
  }
  f.header_ = {static_cast<std::uint32_t>(n), 0, std::uint64_t{top} + 1, true};
  return f;
}

HashValue HashFamily::table_lookup(HashIndex u, TimeIndex time, std::uint32_t position) const {
  const auto it = table_.find(table_key(time, position));
  if (it == table_.end()) return static_cast<HashValue>(header_.range - 1);
  return it->second[u];
}

HashValue hash_cell(const HashFamily& family, HashIndex u, STCell cell, const SpIndex& index) {
  if (u >= family.size()) fail(ErrorCode::invalid_argument, "hash index out of range");
  if (cell.unit >= index.unit_count()) fail(ErrorCode::unknown_unit, "unknown unit in cell");
  const auto range = index.base_range(cell.unit);
  HashValue best = std::numeric_limits<HashValue>::max();
  for (auto p = range.begin; p < range.end; ++p) best = std::min(best, family.base_hash(u, cell.time, p));
  return best;
}

SignatureList compute_signatures(const CellSequence& seq, const HashFamily& family,
                                 const SpIndex& index) {
  if (seq.empty()) fail(ErrorCode::invalid_argument, "empty trace has no signature");
  SignatureList out;
  out.levels.resize(static_cast<std::size_t>(seq.height()));
  for (int l = seq.height(); l >= 1; --l) {
    auto& sig = out.levels[static_cast<std::size_t>(l - 1)];
    sig.setConstant(family.size(), std::numeric_limits<HashValue>::max());
    for (auto key : seq.level(l)) {
      const auto cell = STCell::from_key(key);
      const auto range = index.base_range(cell.unit);
      for (auto p = range.begin; p < range.end; ++p)
        for (HashIndex u = 0; u < family.size(); ++u)
          sig[u] = std::min(sig[u], family.base_hash(u, cell.time, p));
    }
  }
  return out;
}

SignatureList SignatureSet::entity(std::size_t e) const {
  SignatureList s;
  for (const auto& m : levels) s.levels.emplace_back(m.col(static_cast<Eigen::Index>(e)));
  return s;
}

void SignatureSet::set_entity(std::size_t e, const SignatureList& sig) {
  if (sig.height() != height()) fail(ErrorCode::invalid_argument, "signature height mismatch");
  for (int l = 1; l <= height(); ++l) level(l).col(static_cast<Eigen::Index>(e)) = sig.level(l);
}

SignatureSet compute_signature_set(std::span<const CellSequence> sequences, const HashFamily& family,
                                   const SpIndex& index, unsigned threads) {
  const int m = index.height();
  const auto n_h = family.size();
  const auto E = sequences.size();
  SignatureSet out;
  out.levels.assign(static_cast<std::size_t>(m), SigMatrix(n_h, static_cast<Eigen::Index>(E)));
  if (E == 0) return out;

  std::vector<TimeIndex> times;
  for (const auto& seq : sequences) {
    if (seq.height() != m) fail(ErrorCode::invalid_argument, "sequence height does not match the index");
    if (seq.empty()) fail(ErrorCode::invalid_argument, "empty trace has no signature");
    for (auto k : seq.base()) times.push_back(STCell::from_key(k).time);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  const std::size_t U = index.unit_count();
  const std::size_t cells = U * times.size();
  auto column_of = [&](std::uint64_t key) {
    const auto c = STCell::from_key(key);
    const auto t = std::lower_bound(times.begin(), times.end(), c.time) - times.begin();
    return static_cast<std::uint32_t>(static_cast<std::size_t>(t) * U + c.unit);
  };
  // Column lists per entity, all levels concatenated with per-level offsets.
  std::vector<std::vector<std::uint32_t>> columns(E);
  std::vector<std::vector<std::uint32_t>> offsets(E);
  parallel_for(E, threads, [&](std::size_t b, std::size_t e) {
    for (auto i = b; i < e; ++i) {
      offsets[i].push_back(0);
      for (int l = 1; l <= m; ++l) {
        for (auto k : sequences[i].level(l)) columns[i].push_back(column_of(k));
        offsets[i].push_back(static_cast<std::uint32_t>(columns[i].size()));
      }
    }
  });

  std::uint32_t block = std::min<std::uint32_t>(kMaxBlock, n_h);
  while (block > 1 && std::size_t{block} * cells * sizeof(HashValue) > kTableBudgetBytes) block /= 2;
  SigMatrix table(block, static_cast<Eigen::Index>(cells));

  for (std::uint32_t h0 = 0; h0 < n_h; h0 += block) {
    const std::uint32_t B = std::min(block, n_h - h0);
    // Base cells directly, then coarser units as minima over their children.
    parallel_for(times.size(), threads, [&](std::size_t b, std::size_t e) {
      for (auto ti = b; ti < e; ++ti) {
        const auto t = times[ti];
        const auto base_col = ti * U;
        for (std::uint32_t p = 0; p < index.base_count(); ++p) {
          HashValue* col = table.col(static_cast<Eigen::Index>(base_col + index.base_unit(p))).data();
          for (std::uint32_t j = 0; j < B; ++j) col[j] = family.base_hash(h0 + j, t, p);
        }
        for (int l = m - 1; l >= 1; --l)
          for (auto unit : index.units_at_level(l)) {
            auto dst = table.col(static_cast<Eigen::Index>(base_col + unit)).head(B);
            const auto kids = index.children(unit);
            dst = table.col(static_cast<Eigen::Index>(base_col + kids[0])).head(B);
            for (std::size_t c = 1; c < kids.size(); ++c)
              dst = dst.cwiseMin(table.col(static_cast<Eigen::Index>(base_col + kids[c])).head(B));
          }
      }
    });
    parallel_for(E, threads, [&](std::size_t b, std::size_t e) {
      SigVector acc(B);
      for (auto i = b; i < e; ++i) {
        const auto& cols = columns[i];
        for (int l = 1; l <= m; ++l) {
          const auto begin = offsets[i][static_cast<std::size_t>(l - 1)];
          const auto end = offsets[i][static_cast<std::size_t>(l)];
          acc.setConstant(std::numeric_limits<HashValue>::max());
          HashValue* a = acc.data();
          for (auto c = begin; c < end; ++c) {
            const HashValue* src = table.col(cols[c]).data();
            for (std::uint32_t j = 0; j < B; ++j) a[j] = std::min(a[j], src[j]);
          }
          out.level(l).block(h0, static_cast<Eigen::Index>(i), B, 1) = acc;
        }
      }
    });
  }
  return out;
}

bool excludes(HashValue sig_value, int level_i, HashIndex u, STCell cell, const HashFamily& family,
              const SpIndex& index) {
  if (cell.unit >= index.unit_count()) fail(ErrorCode::unknown_unit, "unknown unit in cell");
  if (index.level(cell.unit) < level_i)
    fail(ErrorCode::invalid_argument, "exclusion is only sound for cells at or below the signature level");
  return sig_value > hash_cell(family, u, cell, index);
}

}  // namespace minsig
