#include <fstream>
#include <sstream>

#include "phil/microgrid.hpp"

namespace phil {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

Real parse_field(const std::string& text, const std::string& origin, std::size_t line) {
    try {
        std::size_t used = 0;
        const Real v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v))
            throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin + ":" + std::to_string(line) + ": invalid number '" + text + "'");
    }
}

} // namespace

LoadProfile parse_profile_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    LoadProfile profile;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty())
            continue;
        if (!header) {
            if (line.rfind("\xEF\xBB\xBF", 0) == 0)
                line = line.substr(3);
            if (line != "t_s,p_w,q_var")
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected header 't_s,p_w,q_var'");
            header = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream row(line);
        std::string field;
        while (std::getline(row, field, ','))
            fields.push_back(trim(field));
        if (fields.size() != 3)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 3 fields");
        ProfilePoint p{parse_field(fields[0], origin, line_no), parse_field(fields[1], origin, line_no),
                       parse_field(fields[2], origin, line_no)};
        if (!profile.points.empty() && !(p.t > profile.points.back().t))
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": breakpoint times must be strictly increasing");
        profile.points.push_back(p);
    }
    if (profile.points.empty())
        throw ConfigError(origin + ": load profile has no breakpoints");
    return profile;
}

LoadProfile load_profile_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open load profile " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_profile_csv(buffer.str(), path.string());
}

} // namespace phil
