// Bank container: one text line "SPARSESCENE-BANK <n>\n", an n-byte JSON
// header, then little-endian float64 atom matrices (column-major), one block
// per dictionary in header order (noise first, then speakers).

#include <bit>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "sparsescene/dictionary.hpp"
#include "sparsescene/error.hpp"

namespace sparsescene {

namespace {

constexpr const char* kMagic = "SPARSESCENE-BANK";

nlohmann::json describe(const Dictionary& d, const char* kind) {
  nlohmann::json j;
  j["kind"] = kind;
  j["source_label"] = d.source_label;
  j["method"] = to_string(d.params.method);
  j["rows"] = d.atoms.rows();
  j["n_atoms"] = d.atoms.cols();
  j["budget"] = d.params.n_atoms;
  j["seed"] = d.params.seed;
  j["max_iters"] = d.params.max_iters;
  j["appended_count"] = d.appended_count;
  if (d.params.method == LearnMethod::Tdcs) {
    j["t_within"] = d.params.t_within;
    j["t_between"] = d.params.t_between;
  }
  return j;
}

void append_block(std::string& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
  }
}

[[noreturn]] void corrupt(const std::string& why) {
  throw BankFormatError(BankErrorCode::Corrupt, "corrupt bank file: " + why);
}

}  // namespace

void save_bank(const DictionaryBank& bank, const std::filesystem::path& path) {
  bank.validate();
  nlohmann::json header;
  header["format_version"] = kBankFormatVersion;
  header["P"] = bank.dim();
  header["atom_count"] = bank.atom_count;
  header["learning_order"] = "noise-then-speakers";
  header["dictionaries"] = nlohmann::json::array();
  for (const auto& d : bank.noise) header["dictionaries"].push_back(describe(d, "noise"));
  for (const auto& d : bank.speakers) header["dictionaries"].push_back(describe(d, "speaker"));
  const std::string text = header.dump();

  std::string out = std::string(kMagic) + " " + std::to_string(text.size()) + "\n" + text;
  for (const auto& d : bank.noise) append_block(out, d.atoms);
  for (const auto& d : bank.speakers) append_block(out, d.atoms);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write bank file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

DictionaryBank load_bank(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open bank file: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  const auto eol = bytes.find('\n');
  if (eol == std::string::npos || eol > 64) corrupt("missing preamble");
  std::istringstream preamble(bytes.substr(0, eol));
  std::string magic;
  std::size_t header_len = 0;
  if (!(preamble >> magic >> header_len) || magic != kMagic) corrupt("bad magic");
  if (bytes.size() < eol + 1 + header_len) corrupt("header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(eol + 1, header_len));
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("unparsable header (") + e.what() + ")");
  }

  DictionaryBank bank;
  std::size_t offset = eol + 1 + header_len;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kBankFormatVersion)
      throw BankFormatError(BankErrorCode::VersionMismatch,
                            "bank format version " + std::to_string(version) + " is not supported (expected " +
                                std::to_string(kBankFormatVersion) + ")");
    const auto P = header.at("P").get<Eigen::Index>();
    bank.atom_count = header.at("atom_count").get<int>();
    for (const auto& entry : header.at("dictionaries")) {
      Dictionary d;
      d.source_label = entry.at("source_label").get<std::string>();
      d.params.method = parse_method(entry.at("method").get<std::string>());
      d.params.n_atoms = entry.at("budget").get<int>();
      d.params.seed = entry.at("seed").get<std::uint64_t>();
      d.params.max_iters = entry.value("max_iters", 0);
      d.params.t_within = entry.value("t_within", 0.0);
      d.params.t_between = entry.value("t_between", 0.0);
      d.appended_count = entry.at("appended_count").get<int>();
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("n_atoms").get<Eigen::Index>();
      if (rows != P)
        throw BankFormatError(BankErrorCode::DimensionMismatch,
                              "dictionary '" + d.source_label + "' has " + std::to_string(rows) +
                                  " rows, bank declares P = " + std::to_string(P));
      const std::size_t need = static_cast<std::size_t>(rows * cols) * 8u;
      if (bytes.size() < offset + need) corrupt("atom block for '" + d.source_label + "' truncated");
      d.atoms.resize(rows, cols);
      for (Eigen::Index i = 0; i < d.atoms.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
          bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i) * 8u + static_cast<std::size_t>(b)])) << (8 * b);
        d.atoms.data()[i] = std::bit_cast<double>(bits);
      }
      offset += need;
      const auto kind = entry.at("kind").get<std::string>();
      if (kind == "noise") bank.noise.push_back(std::move(d));
      else if (kind == "speaker") bank.speakers.push_back(std::move(d));
      else corrupt("unknown dictionary kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("malformed header field (") + e.what() + ")");
  } catch (const UsageError& e) {
    corrupt(e.what());
  }
  if (offset != bytes.size()) corrupt("trailing bytes after atom blocks");
  bank.validate();
  return bank;
}

}  // namespace sparsescene
