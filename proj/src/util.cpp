#include "util.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "smmkg/error.hpp"

namespace smmkg {

std::string normalize_label(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
    return out;
}

std::vector<std::string> split_any(std::string_view text, std::string_view separators) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : text) {
        if (separators.find(c) != std::string_view::npos) {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);
    return parts;
}

std::string strip_list_marker(std::string_view item) {
    size_t begin = 0;
    size_t end = item.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(item[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(item[end - 1]))) --end;

    size_t p = begin;
    while (p < end && (item[p] == '-' || item[p] == '*' || item[p] == '+')) ++p;
    if (p == begin) {
        size_t q = begin;
        while (q < end && std::isdigit(static_cast<unsigned char>(item[q]))) ++q;
        if (q > begin && q < end && (item[q] == '.' || item[q] == ')')) p = q + 1;
    }
    while (p < end && std::isspace(static_cast<unsigned char>(item[p]))) ++p;
    return std::string(item.substr(p, end - p));
}

uint64_t fnv1a64(std::string_view data) {
    uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

namespace {

std::string digest_hex(const unsigned char* digest, unsigned int len) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(static_cast<size_t>(len) * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0f]);
    }
    return out;
}

} // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    return digest_hex(digest, len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::io, "cannot read file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return sha256_hex(buffer.str());
}

std::string stable_id(std::string_view kind, std::string_view label,
                      std::string_view provenance) {
    std::string payload;
    payload.reserve(kind.size() + label.size() + provenance.size() + 2);
    payload.append(kind);
    payload.push_back('\x1f');
    payload.append(label);
    payload.push_back('\x1f');
    payload.append(provenance);
    return sha256_hex(payload).substr(0, 32);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::io, "cannot read file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string read_text_file_trimmed(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    return text;
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(ErrorKind::io, "cannot write file: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) raise(ErrorKind::io, "short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace smmkg
