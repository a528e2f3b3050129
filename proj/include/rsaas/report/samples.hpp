#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rsaas/doe/experiment.hpp"

namespace rsaas::report {

inline constexpr const char* kRawHeader = "config_id,arm,vm,kind,seq,latency_us";

/// One parsed row of a raw sample file.
struct RawSample {
    std::string config_id;
    doe::Arm arm = doe::Arm::Without;
    std::string vm;
    app::SampleKind kind = app::SampleKind::ReplicaRoundTrip;
    std::uint64_t seq = 0;
    double latency_us = 0.0;
};

inline std::string format_latency_us(Duration d) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%lld.%03lld", static_cast<long long>(d.count() / 1000),
                  static_cast<long long>(d.count() % 1000));
    return buf;
}

inline void write_rows(std::ostream& out, const doe::CellResult& cell) {
    for (const auto& s : cell.result.samples)
        out << cell.cell.run_id << ',' << to_string(cell.cell.arm) << ',' << s.vm << ',' << to_string(s.kind) << ','
            << s.seq << ',' << format_latency_us(s.latency) << '\n';
}

/// raw/r01_LOW_FIFO__without__rep000.csv
inline std::string cell_file_name(const doe::CellSpec& c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "r%02zu_", c.run_index + 1);
    std::string name = buf + c.run_id + "__" + std::string(to_string(c.arm)) + "__rep";
    std::snprintf(buf, sizeof buf, "%03u", c.repetition);
    return name + buf + ".csv";
}

inline constexpr const char* kMergedName = "samples.csv";

/// Writes the campaign under `dir/raw`, one file per cell or one merged
/// file. Returns the paths written.
inline std::vector<std::filesystem::path> write_raw(const doe::CampaignData& data, const std::filesystem::path& dir,
                                                    bool merged) {
    const auto raw = dir / "raw";
    std::filesystem::create_directories(raw);
    for (const auto& e : std::filesystem::directory_iterator(raw))
        if (e.path().extension() == ".csv") std::filesystem::remove(e.path());
    std::vector<std::filesystem::path> out;
    auto open = [&](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw Error(Errc::BadSampleFile, "cannot write '" + p.string() + "'");
        f << kRawHeader << '\n';
        out.push_back(p);
        return f;
    };
    if (merged) {
        auto f = open(raw / kMergedName);
        for (const auto& c : data.cells) write_rows(f, c);
    } else {
        for (const auto& c : data.cells) {
            auto f = open(raw / cell_file_name(c.cell));
            write_rows(f, c);
        }
    }
    return out;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline std::vector<RawSample> read_raw_stream(std::istream& in, const std::string& source) {
    std::vector<RawSample> out;
    std::string line;
    std::size_t lineno = 0;
    auto bad = [&](const std::string& why) {
        return Error(Errc::BadSampleFile, source + ":" + std::to_string(lineno) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != kRawHeader) throw bad("expected header '" + std::string(kRawHeader) + "'");
            continue;
        }
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 6) throw bad("expected 6 fields");
        RawSample s;
        s.config_id = f[0];
        const auto arm = doe::parse_arm(f[1]);
        if (!arm) throw bad("arm must be 'with' or 'without'");
        s.arm = *arm;
        s.vm = f[2];
        const auto kind = app::parse_sample_kind(f[3]);
        if (!kind) throw bad("unknown sample kind '" + f[3] + "'");
        s.kind = *kind;
        try {
            std::size_t used = 0;
            s.seq = std::stoull(f[4], &used);
            if (used != f[4].size()) throw bad("bad seq");
            s.latency_us = std::stod(f[5], &used);
            if (used != f[5].size()) throw bad("bad latency");
        } catch (const std::logic_error&) {
            throw bad("bad number");
        }
        if (!(s.latency_us >= 0.0)) throw bad("negative latency");
        out.push_back(std::move(s));
    }
    if (lineno == 0) throw Error(Errc::BadSampleFile, source + ": empty file");
    return out;
}

/// Reads every *.csv under `raw_dir` in file-name order.
inline std::vector<RawSample> read_raw_dir(const std::filesystem::path& raw_dir) {
    if (!std::filesystem::is_directory(raw_dir))
        throw Error(Errc::BadSampleFile, "no raw sample directory '" + raw_dir.string() + "'");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(raw_dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(Errc::BadSampleFile, "no raw sample files in '" + raw_dir.string() + "'");
    std::vector<RawSample> out;
    for (const auto& p : files) {
        std::ifstream in(p, std::ios::binary);
        auto rows = read_raw_stream(in, p.filename().string());
        out.insert(out.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
    }
    return out;
}

}  // namespace rsaas::report
