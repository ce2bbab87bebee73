#include "razcert/certificate_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace razcert {

namespace {

constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        std::uint32_t v = std::uint32_t(bytes[i]) << 16 | std::uint32_t(bytes[i + 1]) << 8 |
                          std::uint32_t(bytes[i + 2]);
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out.push_back(kB64Chars[v & 63]);
        i += 3;
    }
    std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        std::uint32_t v = std::uint32_t(bytes[i]) << 16;
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rest == 2) {
        std::uint32_t v = std::uint32_t(bytes[i]) << 16 | std::uint32_t(bytes[i + 1]) << 8;
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw FormatError("invalid base64 character");
    };
    if (text.size() % 4 != 0) throw FormatError("base64 length must be a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int a = value_of(text[i]), b = value_of(text[i + 1]);
        int c = value_of(text[i + 2]), d = value_of(text[i + 3]);
        if (a < 0 || b < 0) throw FormatError("malformed base64 block");
        std::uint32_t v = std::uint32_t(a) << 18 | std::uint32_t(b) << 12;
        out.push_back(std::uint8_t(v >> 16));
        if (c >= 0) {
            v |= std::uint32_t(c) << 6;
            out.push_back(std::uint8_t((v >> 8) & 0xff));
            if (d >= 0) {
                v |= std::uint32_t(d);
                out.push_back(std::uint8_t(v & 0xff));
            }
        } else if (d >= 0) {
            throw FormatError("malformed base64 padding");
        }
    }
    return out;
}

namespace {

using json = nlohmann::ordered_json;

json mlp_to_json(const Mlp& net) {
    json layers = json::array();
    for (const auto& l : net.layers) {
        std::vector<std::uint8_t> wbytes, bbytes;
        Mlp single;
        single.layers.push_back(l);
        auto blob = serialize_weights(single);
        // split the layer blob into weight and bias portions
        std::size_t wlen = l.w.data.size() * 8;
        wbytes.assign(blob.begin(), blob.begin() + long(wlen));
        bbytes.assign(blob.begin() + long(wlen), blob.end());
        layers.push_back({{"rows", l.w.rows},
                          {"cols", l.w.cols},
                          {"weights", base64_encode(wbytes)},
                          {"bias", base64_encode(bbytes)}});
    }
    return layers;
}

Mlp mlp_from_json(const json& layers) {
    Mlp net;
    for (const auto& lj : layers) {
        Layer l;
        l.w = Matrix(lj.at("rows").get<std::size_t>(), lj.at("cols").get<std::size_t>());
        l.b = Vec(l.w.rows, 0.0);
        auto wbytes = base64_decode(lj.at("weights").get<std::string>());
        auto bbytes = base64_decode(lj.at("bias").get<std::string>());
        std::vector<std::uint8_t> blob = wbytes;
        blob.insert(blob.end(), bbytes.begin(), bbytes.end());
        Mlp single;
        single.layers.push_back(l);
        deserialize_weights(single, blob);
        net.layers.push_back(single.layers.front());
    }
    if (net.layers.empty()) throw FormatError("certificate: network without layers");
    return net;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < m.rows; ++r) {
        if (rows[r].size() != m.cols) throw FormatError("certificate: ragged matrix");
        for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c].get<double>();
    }
    return m;
}

}  // namespace

std::string certificate_to_json(const Certificate& cert) {
    json j;
    j["format_version"] = 1;
    j["constants"] = {{"p", cert.constants.p},         {"epsilon", cert.constants.epsilon},
                      {"psi", cert.constants.psi},     {"a1", cert.constants.a1},
                      {"a2", cert.constants.a2},       {"eps_p", cert.constants.eps_p},
                      {"eps_d", cert.constants.eps_d}};
    j["gamma"] = matrix_to_json(cert.gamma);
    j["gamma_pure"] = matrix_to_json(cert.gamma_pure);
    j["classes"] = {{"members", cert.classes.members},
                    {"representatives", cert.classes.representative},
                    {"class_of", cert.classes.class_of},
                    {"slot_map", cert.classes.slot_map}};
    j["v_nets"] = json::array();
    for (const auto& v : cert.v_nets)
        j["v_nets"].push_back({{"layers", mlp_to_json(v.net)}, {"offset", v.offset}});
    j["pi_nets"] = json::array();
    for (const auto& p : cert.pi_nets)
        j["pi_nets"].push_back({{"layers", mlp_to_json(p.net)}, {"offset", p.offset}});
    j["lipschitz_v"] = cert.lipschitz_v;
    j["lipschitz_pi"] = cert.lipschitz_pi;
    j["provenance"] = {{"config_hash", cert.config_hash},
                       {"seed", cert.seed},
                       {"verdict", cert.verdict},
                       {"report_digest", cert.report_digest}};
    return j.dump(2);
}

Certificate certificate_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw FormatError(std::string("certificate: invalid JSON: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1)
            throw FormatError("certificate: unsupported format version");
        Certificate cert;
        const auto& kc = j.at("constants");
        cert.constants.p = kc.at("p").get<double>();
        cert.constants.epsilon = kc.at("epsilon").get<double>();
        cert.constants.psi = kc.at("psi").get<double>();
        cert.constants.a1 = kc.at("a1").get<double>();
        cert.constants.a2 = kc.at("a2").get<double>();
        cert.constants.eps_p = kc.at("eps_p").get<double>();
        cert.constants.eps_d = kc.at("eps_d").get<double>();
        cert.gamma = matrix_from_json(j.at("gamma"));
        cert.gamma_pure = matrix_from_json(j.at("gamma_pure"));
        const auto& cl = j.at("classes");
        cert.classes.members = cl.at("members").get<std::vector<std::vector<int>>>();
        cert.classes.representative = cl.at("representatives").get<std::vector<int>>();
        cert.classes.class_of = cl.at("class_of").get<std::vector<int>>();
        cert.classes.slot_map = cl.at("slot_map").get<std::vector<std::vector<int>>>();
        for (const auto& vj : j.at("v_nets")) {
            LyapunovNet v;
            v.net = mlp_from_json(vj.at("layers"));
            v.offset = vj.at("offset").get<double>();
            cert.v_nets.push_back(std::move(v));
        }
        for (const auto& pj : j.at("pi_nets")) {
            PolicyNet p;
            p.net = mlp_from_json(pj.at("layers"));
            p.offset = pj.at("offset").get<Vec>();
            cert.pi_nets.push_back(std::move(p));
        }
        cert.lipschitz_v = j.at("lipschitz_v").get<std::vector<double>>();
        cert.lipschitz_pi = j.at("lipschitz_pi").get<std::vector<double>>();
        const auto& prov = j.at("provenance");
        cert.config_hash = prov.at("config_hash").get<std::string>();
        cert.seed = prov.at("seed").get<std::uint64_t>();
        cert.verdict = prov.at("verdict").get<std::string>();
        cert.report_digest = prov.at("report_digest").get<std::string>();
        if (cert.verdict == "verified" && cert.report_digest.empty())
            throw FormatError("certificate: verified verdict without a report digest");
        return cert;
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("certificate: malformed document: ") + e.what());
    }
}

void save_certificate(const Certificate& cert, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write certificate file: " + path);
    out << certificate_to_json(cert) << '\n';
}

Certificate load_certificate(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open certificate file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return certificate_from_json(buf.str());
}

}  // namespace razcert
