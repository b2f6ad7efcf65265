#include "rcml/hashing.hpp"

#include <openssl/sha.h>

#include <fstream>
#include <sstream>

#include "rcml/errors.hpp"

namespace rcml {

std::string sha1_hex(std::string_view bytes) {
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned char b : digest) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xf]);
    }
    return out;
}

std::string git_blob_hash(std::string_view content) {
    std::string payload = "blob " + std::to_string(content.size());
    payload.push_back('\0');
    payload.append(content);
    return sha1_hex(payload);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot read " + path.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::string git_blob_hash_file(const std::filesystem::path& path) { return git_blob_hash(read_file(path)); }

}  // namespace rcml
