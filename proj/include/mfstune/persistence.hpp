#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "mfstune/tuner.hpp"

namespace mfstune {

inline constexpr const char* kLedgerFormat = "mfstune-ledger/1";

/// Append-only newline-delimited JSON ledger. Every record is flushed and
/// synced to disk before write returns.
class LedgerWriter {
 public:
  /// Creates (truncating) a ledger and writes its header.
  static LedgerWriter create(const std::filesystem::path& path, const nlohmann::json& header);
  /// Opens an existing ledger for appending.
  static LedgerWriter append_to(const std::filesystem::path& path);

  LedgerWriter(LedgerWriter&& other) noexcept;
  LedgerWriter& operator=(LedgerWriter&&) = delete;
  LedgerWriter(const LedgerWriter&) = delete;
  ~LedgerWriter();

  void write_entry(std::size_t index, const LedgerEntry& entry, int j_begin, int j_end,
                   std::uint64_t seed);
  void write_result(const TuningResult& result);

 private:
  explicit LedgerWriter(std::FILE* file) : file_(file) {}
  void write_record(const nlohmann::json& record);

  std::FILE* file_ = nullptr;
};

nlohmann::json entry_record(std::size_t index, const LedgerEntry& entry, int j_begin, int j_end,
                            std::uint64_t seed);

struct LedgerFile {
  nlohmann::json header;
  Ledger ledger;
  std::optional<nlohmann::json> result;
};

/// Replays a ledger file. Throws ResumeIntegrityError on malformed records,
/// out-of-order indices, inconsistent budget counters or a torn final line.
LedgerFile read_ledger(const std::filesystem::path& path);

}  // namespace mfstune
