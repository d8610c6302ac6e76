#include "phil/harness/export.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace phil {

std::size_t decimated_count(std::uint64_t steps, std::size_t decimation) {
    const std::uint64_t d = std::max<std::size_t>(decimation, 1);
    return static_cast<std::size_t>((steps + d - 1) / d);
}

namespace {

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : m_path(path), m_out(path, std::ios::binary) {
        if (!m_out)
            throw IoError("cannot open " + path.string() + " for writing");
    }

    void header(const std::vector<std::string>& names) {
        for (std::size_t k = 0; k < names.size(); ++k) {
            if (k)
                m_line += ',';
            m_line += names[k];
        }
        end_row();
    }

    CsvWriter& operator<<(Real value) {
        if (!m_first)
            m_line += ',';
        m_first = false;
        char buffer[32];
        const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
        m_line.append(buffer, result.ptr);
        return *this;
    }

    CsvWriter& operator<<(const Vector3<Real>& v) { return *this << v(0) << v(1) << v(2); }

    void end_row() {
        m_line += '\n';
        m_first = true;
        if (m_line.size() > (1u << 16))
            flush();
    }

    void close() {
        flush();
        m_out.close();
        if (!m_out)
            throw IoError("failed writing " + m_path.string());
    }

private:
    void flush() {
        m_out.write(m_line.data(), static_cast<std::streamsize>(m_line.size()));
        m_line.clear();
        if (!m_out)
            throw IoError("failed writing " + m_path.string());
    }

    std::filesystem::path m_path;
    std::ofstream m_out;
    std::string m_line;
    bool m_first = true;
};

bool wants(const Recording& rec, const std::string& group) {
    return std::find(rec.channels.begin(), rec.channels.end(), group) != rec.channels.end();
}

std::size_t recorded_steps(const Recording& rec) {
    return rec.f_grid.size();
}

void write_grid(const Recording& rec, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.header({"t", "f_grid", "p_pcc", "q_pcc", "v_rms_pcc", "v_rms_n1", "v_rms_n2", "v_rms_n3"});
    for (std::size_t k = 0; k < recorded_steps(rec); ++k) {
        w << rec.time(k) << rec.f_grid[k] << rec.p_pcc[k] << rec.q_pcc[k] << rec.v_rms_pcc[k] << rec.v_rms_n1[k]
          << rec.v_rms_n2[k] << rec.v_rms_n3[k];
        w.end_row();
    }
    w.close();
}

void write_microgrid(const Recording& rec, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.header({"t", "f_m", "v_m", "p_ref", "q_ref"});
    for (std::size_t k = 0; k < rec.f_m.size(); ++k) {
        w << rec.time(k) << rec.f_m[k] << rec.v_m[k] << rec.p_ref[k] << rec.q_ref[k];
        w.end_row();
    }
    w.close();
}

void write_waveforms(const Recording& rec, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.header({"t", "i_a_pcc", "i_b_pcc", "i_c_pcc", "v_a_pcc", "v_b_pcc", "v_c_pcc", "v_a_raw", "v_b_raw", "v_c_raw",
              "v_a_clean", "v_b_clean", "v_c_clean", "i_a_total", "i_b_total", "i_c_total"});
    const std::size_t d = std::max<std::size_t>(rec.decimation, 1);
    for (std::size_t k = 0; k < recorded_steps(rec); k += d) {
        w << rec.time(k) << rec.i_abc_pcc[k] << rec.v_abc_pcc[k] << rec.v_raw[k] << rec.v_clean[k] << rec.i_total[k];
        w.end_row();
    }
    w.close();
}

void write_loadbank(const Recording& rec, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.header({"t", "p_a", "p_b", "p_c", "q_a", "q_b", "q_c"});
    const std::size_t d = std::max<std::size_t>(rec.decimation, 1);
    for (std::size_t k = 0; k < rec.loadbank_p.size(); k += d) {
        w << rec.time(k) << rec.loadbank_p[k] << rec.loadbank_q[k];
        w.end_row();
    }
    w.close();
}

void write_counters(const Recording& rec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << "endpoint,sent,dropped,delivered,missing,duplicate,stale,corrupt,substituted\n";
    for (const auto& c : rec.counters) {
        const auto& n = c.counters;
        out << c.endpoint << ',' << n.sent << ',' << n.dropped << ',' << n.delivered << ',' << n.missing << ','
            << n.duplicate << ',' << n.stale << ',' << n.corrupt << ',' << c.substituted << '\n';
    }
    if (!out)
        throw IoError("failed writing " + path.string());
}

void write_metadata(const Recording& rec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    std::string channels;
    for (const auto& c : rec.channels)
        channels += (channels.empty() ? "" : ";") + c;
    std::string events;
    for (Real t : rec.event_times)
        events += (events.empty() ? "" : ";") + format_real(t);
    out << "key,value\n";
    out << "name," << rec.name << '\n';
    out << "dt," << format_real(rec.dt) << '\n';
    out << "horizon," << format_real(rec.horizon) << '\n';
    out << "warmup," << format_real(rec.warmup) << '\n';
    out << "steps," << rec.steps << '\n';
    out << "decimation," << rec.decimation << '\n';
    out << "seed," << rec.seed << '\n';
    out << "droop," << (rec.droop_enabled ? "on" : "off") << '\n';
    out << "itm," << to_string(rec.itm) << '\n';
    out << "channels," << channels << '\n';
    out << "event_times," << events << '\n';
    out << "quantization_violations," << rec.quantization_violations << '\n';
    if (!out)
        throw IoError("failed writing " + path.string());
}

} // namespace

void export_csv(const Recording& rec, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

    const std::vector<std::pair<std::string, std::function<void(const Recording&, const std::filesystem::path&)>>>
        groups{{"grid", write_grid},
               {"microgrid", write_microgrid},
               {"waveforms", write_waveforms},
               {"loadbank", write_loadbank},
               {"counters", write_counters}};
    for (const auto& [name, writer] : groups) {
        if (wants(rec, name))
            writer(rec, dir / (name + ".csv"));
    }
    write_metadata(rec, dir / "metadata.csv");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    if (!std::getline(in, line))
        throw IoError(path.string() + ": missing header row");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            table.header.push_back(cell);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::vector<Real> row;
        const char* p = line.data();
        const char* end = p + line.size();
        while (p <= end) {
            const char* comma = std::find(p, end, ',');
            Real value = 0.0;
            const auto result = std::from_chars(p, comma, value);
            if (result.ec != std::errc() || result.ptr != comma)
                throw IoError(path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
            row.push_back(value);
            p = comma + 1;
        }
        if (row.size() != table.header.size())
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(table.header.size()) + " fields");
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace phil
