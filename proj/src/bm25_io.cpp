// Binary index file, all integers little-endian:
//
//   magic        8 bytes  "CRSBM25\0"
//   version      u32      (currently 1)
//   catalog_ver  u64      opaque tag supplied by the caller
//   k1, b        f64, f64 (IEEE-754 bit pattern stored as u64)
//   idf_variant  u8       0 = non-negative, 1 = Robertson
//   doc_count    u32
//   docs         doc_count x { ref: str, length: u32 }   sorted by ref
//   term_count   u32
//   terms        term_count x { term: str, n: u32, n x { doc_pos: u32, tf: u32 } }
//                terms sorted ascending, postings by doc_pos ascending;
//                doc_pos indexes the sorted docs table
//   checksum     u64      FNV-1a over every preceding byte
//
// str = u32 byte length followed by the bytes.

#include <algorithm>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "crs/bm25.hpp"
#include "crs/errors.hpp"
#include "binio.hpp"

namespace crs::bm25 {
namespace {

constexpr char kMagic[8] = {'C', 'R', 'S', 'B', 'M', '2', '5', '\0'};
constexpr std::uint32_t kVersion = 1;

using binio::fnv1a;
using binio::Reader;
using binio::Writer;

}  // namespace

void InvertedIndex::save(std::ostream& out, const FileHeader& header) const {
    Writer w;
    w.raw(std::string_view(kMagic, sizeof kMagic));
    w.u32(kVersion);
    w.u64(header.catalog_version);
    w.f64(params_.k1);
    w.f64(params_.b);
    w.u8(static_cast<std::uint8_t>(params_.idf));

    std::vector<std::uint32_t> position(doc_refs_.size());
    w.u32(static_cast<std::uint32_t>(docs_by_ref_.size()));
    for (std::uint32_t pos = 0; pos < docs_by_ref_.size(); ++pos) {
        const DocId d = docs_by_ref_[pos];
        position[d] = pos;
        w.str(doc_refs_[d]);
        w.u32(doc_lengths_[d]);
    }

    std::vector<TermId> order(terms_.size());
    for (TermId t = 0; t < order.size(); ++t) order[t] = t;
    std::sort(order.begin(), order.end(), [&](TermId a, TermId b) { return terms_[a] < terms_[b]; });
    w.u32(static_cast<std::uint32_t>(order.size()));
    std::vector<std::pair<std::uint32_t, std::uint32_t>> plist;
    for (TermId t : order) {
        plist.clear();
        for (const auto& p : postings_[t]) plist.emplace_back(position[p.doc], p.tf);
        std::sort(plist.begin(), plist.end());
        w.str(terms_[t]);
        w.u32(static_cast<std::uint32_t>(plist.size()));
        for (auto [pos, tf] : plist) {
            w.u32(pos);
            w.u32(tf);
        }
    }
    const auto checksum = fnv1a(w.bytes());
    w.u64(checksum);
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw std::runtime_error("bm25: failed writing index");
}

InvertedIndex InvertedIndex::load(std::istream& in, FileHeader* header) {
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();
    if (data.size() < sizeof kMagic + 8 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        throw InputError("not a bm25 index file (bad magic)");
    const std::string_view payload(data.data(), data.size() - 8);
    Reader tail(std::string_view(data).substr(data.size() - 8));
    if (tail.u64() != fnv1a(payload)) throw InputError("index file checksum mismatch");

    Reader r(payload);
    r.take(sizeof kMagic);
    const auto version = r.u32();
    if (version != kVersion) throw InputError("unsupported index file version " + std::to_string(version));
    FileHeader hdr;
    hdr.catalog_version = r.u64();
    Params params;
    params.k1 = r.f64();
    params.b = r.f64();
    const auto variant = r.u8();
    if (variant > 1) throw InputError("index file: unknown idf variant");
    params.idf = static_cast<IdfVariant>(variant);

    InvertedIndex index(params);
    const auto doc_count = r.u32();
    for (std::uint32_t i = 0; i < doc_count; ++i) {
        std::string ref = r.str();
        const auto len = r.u32();
        if (i > 0 && !(index.doc_refs_.back() < ref)) throw InputError("index file: documents not sorted/unique");
        index.doc_lookup_.emplace(ref, i);
        index.doc_refs_.push_back(std::move(ref));
        index.doc_lengths_.push_back(len);
        index.docs_by_ref_.push_back(i);
        index.total_length_ += len;
    }

    std::vector<std::uint64_t> tf_sum(doc_count, 0);
    const auto term_count = r.u32();
    for (std::uint32_t t = 0; t < term_count; ++t) {
        std::string term = r.str();
        if (term.empty()) throw InputError("index file: empty term");
        if (!index.term_lookup_.emplace(term, t).second) throw InputError("index file: duplicate term");
        const auto n = r.u32();
        std::vector<Posting> plist;
        plist.reserve(n);
        for (std::uint32_t j = 0; j < n; ++j) {
            const auto pos = r.u32();
            const auto tf = r.u32();
            if (pos >= doc_count || tf == 0 || (!plist.empty() && plist.back().doc >= pos))
                throw InputError("index file: malformed postings for '" + term + "'");
            tf_sum[pos] += tf;
            plist.push_back(Posting{pos, tf});
        }
        index.terms_.push_back(std::move(term));
        index.postings_.push_back(std::move(plist));
    }
    for (std::uint32_t i = 0; i < doc_count; ++i) {
        if (tf_sum[i] != index.doc_lengths_[i]) throw InputError("index file: document length disagrees with postings");
    }
    if (r.pos() != payload.size()) throw InputError("index file: trailing bytes");

    index.refresh_norms();
    if (header) *header = hdr;
    return index;
}

}  // namespace crs::bm25
