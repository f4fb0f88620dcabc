// SPDX-License-Identifier: Apache-2.0

#include "guipra/blob_store.hpp"

#include "guipra/error.hpp"

#include <fstream>
#include <iterator>

namespace guipra {

std::string MemoryBlobStore::put(const Image& image)
{
    auto hash = content_hash(image);
    std::lock_guard lock(mutex_);
    blobs_.try_emplace(hash, image.bytes);
    return hash;
}

Image MemoryBlobStore::get(const std::string& hash, const std::string& media_type) const
{
    std::lock_guard lock(mutex_);
    auto it = blobs_.find(hash);
    if (it == blobs_.end()) {
        throw IoError("unknown blob " + hash);
    }
    return Image{it->second, media_type};
}

std::size_t MemoryBlobStore::size() const
{
    std::lock_guard lock(mutex_);
    return blobs_.size();
}

DirectoryBlobStore::DirectoryBlobStore(std::filesystem::path dir) : dir_(std::move(dir))
{
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
        throw IoError("cannot create blob directory " + dir_.string() + ": " + ec.message());
    }
}

std::string DirectoryBlobStore::put(const Image& image)
{
    auto hash = content_hash(image);
    const auto path = dir_ / hash;
    std::lock_guard lock(mutex_);
    if (std::filesystem::exists(path)) {
        return hash;
    }
    // Write-then-rename so concurrent readers never see a partial blob.
    const auto tmp = dir_ / (hash + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        out.write(image.bytes.data(), static_cast<std::streamsize>(image.bytes.size()));
        if (!out) {
            throw IoError("cannot write blob " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot commit blob " + path.string() + ": " + ec.message());
    }
    return hash;
}

Image DirectoryBlobStore::get(const std::string& hash, const std::string& media_type) const
{
    std::ifstream in(dir_ / hash, std::ios::binary);
    if (!in) {
        throw IoError("unknown blob " + hash);
    }
    return Image{std::string(std::istreambuf_iterator<char>(in), {}), media_type};
}

}  // namespace guipra
