#include "elastic/artifacts.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "elastic/errors.hpp"
#include "elastic/format.hpp"

#ifndef ELASTIC_VERSION
#define ELASTIC_VERSION "unknown"
#endif

namespace elastic {

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file '" + p.string() + "'");
    out << content;
    if (!out) throw ConfigError("failed writing output file '" + p.string() + "'");
}

}  // namespace

std::string git_blob_sha1(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("SHA-1 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

std::string table_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + csv_field(t.columns[i]);
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_double(row[i]);
        out += "\n";
    }
    return out;
}

std::string checks_csv(const Report& r) {
    std::string out = "name,pass,value,threshold,detail\n";
    for (const auto& c : r.checks)
        out += csv_field(c.name) + "," + (c.pass ? "1" : "0") + "," + format_double(c.value) + "," +
               format_double(c.threshold) + "," + csv_field(c.detail) + "\n";
    return out;
}

std::string plot_script(const Report& r) {
    std::ostringstream py;
    py << "#!/usr/bin/env python3\n"
       << "# Plots every table of this " << r.kind << " run. Usage: python3 plot.py\n"
       << "import csv\nimport os\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n"
       << "HERE = os.path.dirname(os.path.abspath(__file__))\n\n\n"
       << "def load(name):\n"
       << "    with open(os.path.join(HERE, name + \".csv\")) as f:\n"
       << "        rows = list(csv.reader(f))\n"
       << "    cols = rows[0]\n"
       << "    data = [[float(v) for v in row] for row in rows[1:]]\n"
       << "    return cols, list(zip(*data)) if data else [[] for _ in cols]\n\n\n"
       << "for name in [";
    for (std::size_t i = 0; i < r.tables.size(); ++i) py << (i ? ", " : "") << "\"" << r.tables[i].name << "\"";
    py << "]:\n"
       << "    cols, data = load(name)\n"
       << "    fig, ax = plt.subplots()\n"
       << "    for j in range(1, len(cols)):\n"
       << "        ax.plot(data[0], data[j], \".\", ms=2, label=cols[j])\n"
       << "    ax.set_xlabel(cols[0])\n"
       << "    ax.set_title(name)\n"
       << "    ax.legend(fontsize=6)\n"
       << "    fig.savefig(os.path.join(HERE, name + \".png\"), dpi=120)\n"
       << "    plt.close(fig)\n";
    return py.str();
}

std::string manifest_json(const Report& r, const ExperimentConfig& c, const std::vector<OutputFile>& outputs) {
    nlohmann::ordered_json j;
    j["tool"] = "elastic-sim";
    j["version"] = ELASTIC_VERSION;
    j["kind"] = r.kind;
    j["seed"] = c.seed;
    j["pass"] = r.pass();
    j["config"] = serialize_config(c);
    nlohmann::ordered_json facts = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.facts) facts[k] = v;
    j["facts"] = facts;
    j["warnings"] = r.warnings;
    nlohmann::ordered_json checks = nlohmann::ordered_json::array();
    for (const auto& ch : r.checks)
        checks.push_back({{"name", ch.name}, {"pass", ch.pass}, {"value", format_double(ch.value)},
                          {"threshold", format_double(ch.threshold)}, {"detail", ch.detail}});
    j["checks"] = checks;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& f : outputs) files.push_back({{"file", f.name}, {"git_blob_sha1", f.sha1}});
    j["outputs"] = files;
    return j.dump(2) + "\n";
}

std::vector<OutputFile> write_artifacts(const Report& r, const ExperimentConfig& c, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("checks.csv", checks_csv(r));
    for (const auto& t : r.tables) files.emplace_back(t.name + ".csv", table_csv(t));
    files.emplace_back("plot.py", plot_script(r));
    std::vector<OutputFile> out;
    for (const auto& [name, content] : files) {
        write_file(fs::path(dir) / name, content);
        out.push_back({name, git_blob_sha1(content)});
    }
    write_file(fs::path(dir) / "manifest.json", manifest_json(r, c, out));
    return out;
}

std::string summary_text(const Report& r) {
    std::ostringstream os;
    for (const auto& c : r.checks) {
        os << (c.pass ? "PASS " : "FAIL ") << c.name << " (value " << format_double(c.value) << ", threshold "
           << format_double(c.threshold);
        if (!c.detail.empty()) os << "; " << c.detail;
        os << ")\n";
    }
    for (const auto& w : r.warnings) os << "WARNING " << w << "\n";
    os << (r.pass() ? "PASS " : "FAIL ") << r.kind << "\n";
    return os.str();
}

}  // namespace elastic
