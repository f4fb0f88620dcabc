// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "guipra/image.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <string>

namespace guipra {

// Content-addressed image storage. put() is idempotent and returns the hash.
class BlobStore {
public:
    virtual ~BlobStore() = default;
    virtual std::string put(const Image& image) = 0;
    // Throws IoError for unknown hashes.
    virtual Image get(const std::string& hash, const std::string& media_type) const = 0;
};

class MemoryBlobStore final : public BlobStore {
public:
    std::string put(const Image& image) override;
    Image get(const std::string& hash, const std::string& media_type) const override;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> blobs_;
};

// Stores each payload as <dir>/<sha256>.
class DirectoryBlobStore final : public BlobStore {
public:
    explicit DirectoryBlobStore(std::filesystem::path dir);

    std::string put(const Image& image) override;
    Image get(const std::string& hash, const std::string& media_type) const override;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::mutex mutex_;
};

}  // namespace guipra
