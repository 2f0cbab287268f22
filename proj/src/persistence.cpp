#include "mfstune/persistence.hpp"

#include <fstream>
#include <sstream>
#include <unistd.h>

#include "mfstune/errors.hpp"

namespace mfstune {

using nlohmann::json;

LedgerWriter LedgerWriter::create(const std::filesystem::path& path, const json& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot create ledger file '" + path.string() + "'");
  LedgerWriter w(f);
  json h = header;
  h["kind"] = "header";
  h["format"] = kLedgerFormat;
  w.write_record(h);
  return w;
}

LedgerWriter LedgerWriter::append_to(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw Error("cannot open ledger file '" + path.string() + "' for appending");
  return LedgerWriter(f);
}

LedgerWriter::LedgerWriter(LedgerWriter&& other) noexcept : file_(other.file_) {
  other.file_ = nullptr;
}

LedgerWriter::~LedgerWriter() {
  if (file_) std::fclose(file_);
}

void LedgerWriter::write_record(const json& record) {
  const std::string line = record.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw Error("failed to write ledger record");
  }
  ::fsync(::fileno(file_));
}

json entry_record(std::size_t index, const LedgerEntry& entry, int j_begin, int j_end,
                  std::uint64_t seed) {
  return {{"kind", "entry"},
          {"index", index},
          {"theta", entry.theta.to_array()},
          {"q", entry.q_values},
          {"preempted", entry.preempted},
          {"failed", entry.failed},
          {"truncated", entry.truncated},
          {"j_begin", j_begin},
          {"j_end", j_end},
          {"seed", seed},
          {"stream", dipole_stream(index)}};
}

void LedgerWriter::write_entry(std::size_t index, const LedgerEntry& entry, int j_begin, int j_end,
                               std::uint64_t seed) {
  write_record(entry_record(index, entry, j_begin, j_end, seed));
}

void LedgerWriter::write_result(const TuningResult& result) {
  write_record({{"kind", "result"},
                {"best_theta", result.best_theta.to_array()},
                {"best_mean", result.best_mean},
                {"distinct", result.distinct},
                {"entries", result.ledger.size()},
                {"j_used", result.ledger.j_used()}});
}

LedgerFile read_ledger(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResumeIntegrityError("cannot open ledger file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.empty()) throw ResumeIntegrityError("ledger file is empty");
  if (text.back() != '\n') throw ResumeIntegrityError("ledger ends with a torn record");

  LedgerFile out;
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception&) {
      throw ResumeIntegrityError(where + ": record is not valid JSON");
    }
    if (!rec.is_object() || !rec.contains("kind")) {
      throw ResumeIntegrityError(where + ": record has no kind");
    }
    const std::string kind = rec.at("kind").get<std::string>();
    if (lineno == 1) {
      if (kind != "header" || rec.value("format", "") != kLedgerFormat) {
        throw ResumeIntegrityError(where + ": missing ledger header");
      }
      out.header = rec;
      continue;
    }
    if (out.result) throw ResumeIntegrityError(where + ": record after the result record");
    try {
      if (kind == "entry") {
        if (rec.at("index").get<std::size_t>() != out.ledger.size()) {
          throw ResumeIntegrityError(where + ": entry index out of sequence");
        }
        if (rec.at("j_begin").get<int>() != out.ledger.j_used()) {
          throw ResumeIntegrityError(where + ": budget counter does not match replay");
        }
        LedgerEntry e;
        e.theta = ThetaVector::from_array(rec.at("theta").get<std::array<double, kThetaDim>>());
        e.q_values = rec.at("q").get<std::vector<double>>();
        e.preempted = rec.at("preempted").get<bool>();
        e.failed = rec.at("failed").get<bool>();
        e.truncated = rec.at("truncated").get<bool>();
        out.ledger.append(std::move(e));
        if (rec.at("j_end").get<int>() != out.ledger.j_used()) {
          throw ResumeIntegrityError(where + ": budget counter does not match replay");
        }
      } else if (kind == "result") {
        out.result = rec;
      } else {
        throw ResumeIntegrityError(where + ": unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ResumeIntegrityError(where + ": malformed record: " + e.what());
    } catch (const InvalidArgument& e) {
      throw ResumeIntegrityError(where + ": " + e.what());
    }
  }
  if (out.header.is_null()) throw ResumeIntegrityError("ledger has no header");
  return out;
}

}  // namespace mfstune
