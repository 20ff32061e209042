#include "minsig/index_io.hpp"

#include <cstring>

#include "byte_codec.hpp"

namespace minsig {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFullSignatures = 1;

}  // namespace

class IndexSerializer {
 public:
  static std::vector<std::uint8_t> encode(const MinSigTree& tree, std::uint32_t fingerprint) {
    detail::ByteWriter w;
    w.raw({kMagic, 4});
    w.fixed(kVersion);
    const auto& f = tree.family_;
    w.fixed(f.hash_count);
    w.fixed(f.master_seed);
    w.fixed(f.range);
    w.fixed(static_cast<std::uint8_t>(f.table_mode));
    w.fixed(static_cast<std::uint32_t>(tree.height_));
    w.fixed(tree.config_.store_full_signatures ? kFullSignatures : 0u);
    w.fixed(fingerprint);
    w.fixed(static_cast<std::uint64_t>(tree.leaf_of_.size()));
    w.fixed(static_cast<std::uint64_t>(tree.entity_count_));
    const auto order = tree.preorder();
    w.fixed(static_cast<std::uint64_t>(order.size()));
    // Levels and parents follow from the preorder child counts.
    for (auto id : order) {
      const auto& n = tree.nodes_[id];
      w.varint(n.route);
      w.varint(n.value);
      // Leaves have no children, so the count slot holds the entity count.
      const bool leaf = n.level == tree.height_;
      const auto count = leaf ? n.entities.size() : n.children.size();
      w.varint((static_cast<std::uint64_t>(count) << 1) | (n.stale ? 1u : 0u));
      if (leaf)
        for (auto e : n.entities) w.varint(e);
      if (tree.config_.store_full_signatures && id != tree.root()) {
        if (!n.full) fail(ErrorCode::invalid_argument, "node lacks its full signature");
        for (Eigen::Index i = 0; i < n.full->size(); ++i) w.varint((*n.full)[i]);
      }
    }
    w.seal();
    return std::move(w.bytes());
  }

  static StoredIndex decode(std::span<const std::uint8_t> bytes) {
    const std::string what = "index";
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0)
      fail(ErrorCode::parse_error, what + ": not an index file");
    detail::ByteReader r(detail::verified_body(bytes, what), what);
    r.fixed<std::uint32_t>();
    if (r.fixed<std::uint32_t>() != kVersion) fail(ErrorCode::version_mismatch, what + ": unsupported version");
    FamilyHeader f;
    f.hash_count = r.fixed<std::uint32_t>();
    f.master_seed = r.fixed<std::uint64_t>();
    f.range = r.fixed<std::uint64_t>();
    f.table_mode = r.fixed<std::uint8_t>() != 0;
    const auto height = static_cast<int>(r.fixed<std::uint32_t>());
    const auto flags = r.fixed<std::uint32_t>();
    StoredIndex out;
    out.dataset_fingerprint = r.fixed<std::uint32_t>();
    MinSigTree tree(f, height, TreeConfig{(flags & kFullSignatures) != 0});
    const auto slots = r.fixed<std::uint64_t>();
    const auto entities = r.fixed<std::uint64_t>();
    const auto count = r.fixed<std::uint64_t>();
    if (count == 0) fail(ErrorCode::parse_error, what + ": missing root");
    tree.leaf_of_.assign(slots, kNoNode);
    tree.nodes_.clear();
    tree.nodes_.reserve(count);

    struct Open {
      NodeId id;
      std::uint64_t remaining;
    };
    std::vector<Open> stack;
    for (std::uint64_t i = 0; i < count; ++i) {
      TreeNode n;
      const auto id = static_cast<NodeId>(i);
      if (!stack.empty()) {
        n.parent = stack.back().id;
        n.level = tree.nodes_[n.parent].level + 1;
        if (n.level > height) fail(ErrorCode::parse_error, what + ": node deeper than the tree height");
        tree.nodes_[n.parent].children.push_back(id);
        --stack.back().remaining;
      } else if (i != 0) {
        fail(ErrorCode::parse_error, what + ": node records do not form one tree");
      }
      n.route = static_cast<HashIndex>(r.varint());
      n.value = static_cast<HashValue>(r.varint());
      const auto packed = r.varint();
      n.stale = packed & 1u;
      auto children = packed >> 1;
      if (n.level == height) {
        n.entities.resize(children);
        children = 0;
        for (auto& e : n.entities) {
          e = static_cast<EntityId>(r.varint());
          if (e >= slots) fail(ErrorCode::parse_error, what + ": entity id out of range");
          tree.leaf_of_[e] = id;
        }
      }
      if (tree.config_.store_full_signatures && i != 0) {
        SigVector full(f.hash_count);
        for (std::uint32_t u = 0; u < f.hash_count; ++u) full[u] = static_cast<HashValue>(r.varint());
        n.full = std::move(full);
      }
      tree.nodes_.push_back(std::move(n));
      while (!stack.empty() && stack.back().remaining == 0) stack.pop_back();
      if (children > 0) stack.push_back({id, children});
    }
    if (!stack.empty() || !r.done()) fail(ErrorCode::parse_error, what + ": inconsistent node records");
    tree.live_nodes_ = count - 1;
    tree.entity_count_ = entities;
    out.tree = std::move(tree);
    return out;
  }
};

std::vector<std::uint8_t> encode_index(const MinSigTree& tree, std::uint32_t dataset_fingerprint) {
  return IndexSerializer::encode(tree, dataset_fingerprint);
}

StoredIndex decode_index(std::span<const std::uint8_t> bytes) { return IndexSerializer::decode(bytes); }

void save_index(const MinSigTree& tree, std::uint32_t dataset_fingerprint, const std::string& path) {
  detail::write_file(path, encode_index(tree, dataset_fingerprint));
}

StoredIndex load_index(const std::string& path) { return decode_index(detail::read_file(path)); }

void check_family(const MinSigTree& tree, const FamilyHeader& family) {
  const auto& f = tree.family();
  if (f == family) return;
  fail(ErrorCode::family_mismatch,
       "index was built with " + std::to_string(f.hash_count) + " hashes, seed " + std::to_string(f.master_seed) +
           ", range " + std::to_string(f.range) + "; query family has " + std::to_string(family.hash_count) +
           " hashes, seed " + std::to_string(family.master_seed) + ", range " + std::to_string(family.range));
}

}  // namespace minsig
