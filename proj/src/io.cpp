#include "amvcast/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace amvcast {

using nlohmann::json;

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + p.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& p, const void* data, std::size_t n) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw IoError("write failure on " + p.string());
}

std::vector<float> floats_from_le(const std::vector<std::uint8_t>& bytes) {
    std::vector<float> out(bytes.size() / 4);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data(), bytes.data(), out.size() * 4);
    } else {
        for (std::size_t k = 0; k < out.size(); ++k) {
            std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * k]) |
                              static_cast<std::uint32_t>(bytes[4 * k + 1]) << 8 |
                              static_cast<std::uint32_t>(bytes[4 * k + 2]) << 16 |
                              static_cast<std::uint32_t>(bytes[4 * k + 3]) << 24;
            out[k] = std::bit_cast<float>(u);
        }
    }
    return out;
}

std::vector<std::uint8_t> floats_to_le(const std::vector<float>& values) {
    std::vector<std::uint8_t> out(values.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data(), values.data(), out.size());
    } else {
        for (std::size_t k = 0; k < values.size(); ++k) {
            const std::uint32_t u = std::bit_cast<std::uint32_t>(values[k]);
            out[4 * k] = static_cast<std::uint8_t>(u & 0xff);
            out[4 * k + 1] = static_cast<std::uint8_t>((u >> 8) & 0xff);
            out[4 * k + 2] = static_cast<std::uint8_t>((u >> 16) & 0xff);
            out[4 * k + 3] = static_cast<std::uint8_t>((u >> 24) & 0xff);
        }
    }
    return out;
}

std::filesystem::path data_path_for(const std::filesystem::path& manifest) {
    std::filesystem::path p = manifest;
    p.replace_extension(".bin");
    return p;
}

std::filesystem::path mask_path_for(const std::filesystem::path& manifest) {
    std::filesystem::path p = manifest;
    p.replace_extension(".mask.bin");
    return p;
}

const char* to_string(SkillClass c) {
    switch (c) {
        case SkillClass::Negative: return "negative";
        case SkillClass::Neutral: return "neutral";
        case SkillClass::Positive: return "positive";
        case SkillClass::Overall: return "overall";
    }
    throw FormatError("invalid skill class value");
}

SkillClass skill_class_from_string(const std::string& s) {
    if (s == "negative") return SkillClass::Negative;
    if (s == "neutral") return SkillClass::Neutral;
    if (s == "positive") return SkillClass::Positive;
    if (s == "overall") return SkillClass::Overall;
    throw FormatError("unknown skill class: " + s);
}

void SkillTable::sort_rows() {
    std::sort(rows.begin(), rows.end(), [](const SkillRow& a, const SkillRow& b) {
        return std::tie(a.model, a.lead, a.cls, a.repetition) <
               std::tie(b.model, b.lead, b.cls, b.repetition);
    });
}

void SkillTable::validate(double count_tol) const {
    std::set<std::tuple<std::string, int, SkillClass, int>> keys;
    for (const SkillRow& r : rows) {
        if (r.model.empty()) throw FormatError("skill row with empty model name");
        if (r.model.find(',') != std::string::npos || r.model.find('\n') != std::string::npos) {
            throw FormatError("model name must not contain ',' or newline");
        }
        if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) {
            throw FormatError("accuracy outside [0, 1]");
        }
        if (r.lead < 0) throw FormatError("negative lead");
        if (r.repetition < 0) throw FormatError("negative repetition");
        if (r.n_test < 0) throw FormatError("negative n_test");
        if (!keys.emplace(r.model, r.lead, r.cls, r.repetition).second) {
            std::ostringstream msg;
            msg << "duplicate skill key (" << r.model << "," << r.lead << ","
                << to_string(r.cls) << "," << r.repetition << ")";
            throw FormatError(msg.str());
        }
        // Chance rows hold the analytic 1/3, not a correct-count ratio.
        if (r.model != kModelChance) {
            const double count = r.accuracy * r.n_test;
            if (std::abs(count - std::round(count)) > count_tol) {
                throw FormatError("accuracy*n_test is not a whole count for model " + r.model);
            }
        }
    }
}

std::filesystem::path write_stack(const FieldStack& stack,
                                  const std::filesystem::path& manifest_path) {
    if (stack.variables.empty()) throw FormatError("refusing to write a stack with no variables");
    stack.validate();  // throws FormatError for non-finite valid cells
    if (!stack.has_shared_mask()) {
        throw FormatError("stack masks are not harmonized; write requires one shared mask");
    }

    const int V = stack.n_vars();
    const int T = stack.n_years();
    const std::size_t cells = static_cast<std::size_t>(stack.height()) * stack.width();

    std::filesystem::path manifest = manifest_path;
    if (manifest.extension() != ".json") manifest += ".json";
    const std::filesystem::path data_file = data_path_for(manifest);
    const std::filesystem::path mask_file = mask_path_for(manifest);

    json j;
    j["schema_version"] = 1;
    json vars = json::array();
    for (const Variable& v : stack.variables) {
        vars.push_back({{"name", v.name}, {"units", v.units}});
    }
    j["variables"] = vars;
    j["member"] = stack.member;
    j["years"] = {stack.start_year, stack.start_year + T - 1};
    j["height"] = stack.height();
    j["width"] = stack.width();
    j["lats"] = stack.grid.lats;
    j["lons"] = stack.grid.lons;
    j["dtype"] = "f32le";
    j["layout"] = "V,T,H,W row-major";
    j["mask_file"] = mask_file.filename().string();

    // Invalid cells carry no data; store them as zero so files are
    // byte-reproducible and NaNs never reach disk.
    std::vector<float> cleaned = stack.data;
    for (int v = 0; v < V; ++v) {
        for (std::size_t k = 0; k < cells; ++k) {
            if (stack.masks[static_cast<std::size_t>(v) * cells + k] != 0) continue;
            for (int t = 0; t < T; ++t) {
                cleaned[(static_cast<std::size_t>(v) * T + t) * cells + k] = 0.0f;
            }
        }
    }

    const std::string text = j.dump(2) + "\n";
    write_file_bytes(manifest, text.data(), text.size());
    const std::vector<std::uint8_t> payload = floats_to_le(cleaned);
    write_file_bytes(data_file, payload.data(), payload.size());
    write_file_bytes(mask_file, stack.masks.data(), cells);  // first variable's slice == shared mask
    return manifest;
}

FieldStack read_stack(const std::filesystem::path& manifest_path) {
    json j;
    {
        std::ifstream in(manifest_path);
        if (!in) throw IoError("cannot open " + manifest_path.string());
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw FormatError("manifest parse error in " + manifest_path.string() + ": " + e.what());
        }
    }

    FieldStack stack;
    try {
        if (j.at("schema_version").get<int>() != 1) {
            throw FormatError("unsupported manifest schema_version in " + manifest_path.string());
        }
        for (const json& v : j.at("variables")) {
            stack.variables.push_back({v.at("name").get<std::string>(),
                                       v.at("units").get<std::string>()});
        }
        const auto years = j.at("years").get<std::vector<int>>();
        if (years.size() != 2 || years[1] < years[0]) {
            throw FormatError("manifest years must be [start, end]");
        }
        stack.start_year = years[0];
        stack.member = j.at("member").get<std::string>();
        stack.grid.lats = j.at("lats").get<std::vector<double>>();
        stack.grid.lons = j.at("lons").get<std::vector<double>>();
        if (j.at("height").get<int>() != stack.grid.height() ||
            j.at("width").get<int>() != stack.grid.width()) {
            throw FormatError("manifest dims do not match axis lengths");
        }
        if (j.at("dtype").get<std::string>() != "f32le") {
            throw FormatError("unsupported dtype in " + manifest_path.string());
        }
        if (j.at("layout").get<std::string>() != "V,T,H,W row-major") {
            throw FormatError("unsupported layout in " + manifest_path.string());
        }

        const int V = stack.n_vars();
        const int T = years[1] - years[0] + 1;
        const std::size_t cells = static_cast<std::size_t>(stack.grid.height()) * stack.grid.width();
        if (V < 1) throw FormatError("manifest lists no variables");

        const std::vector<std::uint8_t> payload = read_file_bytes(data_path_for(manifest_path));
        const std::size_t expected = static_cast<std::size_t>(V) * T * cells * 4;
        if (payload.size() != expected) {
            std::ostringstream msg;
            msg << "data binary length " << payload.size() << " != expected " << expected;
            throw FormatError(msg.str());
        }
        stack.data = floats_from_le(payload);

        const std::filesystem::path mask_file =
            manifest_path.parent_path() / j.at("mask_file").get<std::string>();
        const std::vector<std::uint8_t> mask = read_file_bytes(mask_file);
        if (mask.size() != cells) throw FormatError("mask file length does not match grid");
        for (std::uint8_t m : mask) {
            if (m > 1) throw FormatError("mask bytes must be 0 or 1");
        }
        stack.masks.resize(static_cast<std::size_t>(V) * cells);
        for (int v = 0; v < V; ++v) {
            std::copy(mask.begin(), mask.end(),
                      stack.masks.begin() + static_cast<std::size_t>(v) * cells);
        }
    } catch (const json::exception& e) {
        throw FormatError("manifest field error in " + manifest_path.string() + ": " + e.what());
    }

    stack.validate();
    return stack;
}

void write_skill_csv(const SkillTable& table, const std::filesystem::path& path) {
    if (table.rows.empty()) throw FormatError("refusing to write an empty skill table");
    table.validate();
    SkillTable sorted = table;
    sorted.sort_rows();

    std::ostringstream out;
    out << "model,lead,class,repetition,accuracy,n_test\n";
    char buf[32];
    for (const SkillRow& r : sorted.rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", r.accuracy);
        out << r.model << ',' << r.lead << ',' << to_string(r.cls) << ','
            << r.repetition << ',' << buf << ',' << r.n_test << '\n';
    }
    const std::string text = out.str();
    write_file_bytes(path, text.data(), text.size());
}

SkillTable read_skill_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty skill CSV " + path.string());
    if (line == "model,lead,class,repetition,accuracy,n_test\r") line.pop_back();
    if (line != "model,lead,class,repetition,accuracy,n_test") {
        throw FormatError("unexpected skill CSV header: " + line);
    }

    SkillTable table;
    int max_n = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string model, lead, cls, rep, acc, n;
        if (!std::getline(ls, model, ',') || !std::getline(ls, lead, ',') ||
            !std::getline(ls, cls, ',') || !std::getline(ls, rep, ',') ||
            !std::getline(ls, acc, ',') || !std::getline(ls, n)) {
            throw FormatError("malformed skill CSV row: " + line);
        }
        SkillRow row;
        row.model = model;
        try {
            row.lead = std::stoi(lead);
            row.cls = skill_class_from_string(cls);
            row.repetition = std::stoi(rep);
            row.accuracy = std::stod(acc);
            row.n_test = std::stoi(n);
        } catch (const std::exception&) {
            throw FormatError("malformed skill CSV row: " + line);
        }
        max_n = std::max(max_n, row.n_test);
        table.rows.push_back(std::move(row));
    }
    // 6-decimal serialization quantizes accuracy by up to 5e-7 per unit count.
    table.validate(std::max(1e-9, 5.1e-7 * max_n));
    return table;
}

}  // namespace amvcast
