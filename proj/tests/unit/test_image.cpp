// SPDX-License-Identifier: Apache-2.0

#include "guipra/blob_store.hpp"
#include "guipra/error.hpp"
#include "guipra/image.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace guipra;

TEST(Sha256, KnownVectors)
{
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Base64, KnownVectors)
{
    EXPECT_EQ(base64_encode(""), "");
    EXPECT_EQ(base64_encode("f"), "Zg==");
    EXPECT_EQ(base64_encode("fo"), "Zm8=");
    EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
    EXPECT_EQ(base64_decode("Zm8="), "fo");
    EXPECT_THROW(base64_decode("!!!"), Error);
}

TEST(Base64, RoundTripsRandomBytes)
{
    testsupport::Gen gen(5);
    for (int i = 0; i < 500; ++i) {
        std::string data(gen.below(200), '\0');
        for (auto& c : data) c = static_cast<char>(gen.below(256));
        EXPECT_EQ(base64_decode(base64_encode(data)), data);
    }
}

TEST(Png, RoundTripsPixels)
{
    Raster r(17, 9, Rgb{10, 20, 30});
    r.fill_rect(2, 2, 6, 5, Rgb{200, 0, 0});
    r.set(16, 8, Rgb{1, 2, 3});
    r.set(100, 100, Rgb{9, 9, 9});
    const auto png = encode_png(r);
    EXPECT_EQ(png.bytes.substr(1, 3), "PNG");
    const auto back = decode_png(png);
    ASSERT_EQ(back.width(), 17);
    ASSERT_EQ(back.height(), 9);
    EXPECT_EQ(back.at(3, 3), (Rgb{200, 0, 0}));
    EXPECT_EQ(back.at(16, 8), (Rgb{1, 2, 3}));
    EXPECT_EQ(back.at(0, 0), (Rgb{10, 20, 30}));
    EXPECT_EQ(encode_png(back), png);
}

TEST(Png, RejectsGarbage)
{
    EXPECT_THROW(decode_png(Image{"not a png", "image/png"}), Error);
}

TEST(BlobStore, MemoryStoreIsContentAddressed)
{
    MemoryBlobStore store;
    const Image a{"aaa", "image/png"};
    const auto h1 = store.put(a);
    const auto h2 = store.put(a);
    EXPECT_EQ(h1, h2);
    EXPECT_EQ(h1, content_hash(a));
    EXPECT_EQ(store.size(), 1u);
    EXPECT_EQ(store.get(h1, "image/png"), a);
    EXPECT_THROW(store.get(std::string(64, '0'), "image/png"), IoError);
}

TEST(BlobStore, DirectoryStorePersists)
{
    const auto dir = std::filesystem::temp_directory_path() / "guipra_blob_test";
    std::filesystem::remove_all(dir);
    const Image a{"payload", "image/png"};
    std::string hash;
    {
        DirectoryBlobStore store(dir);
        hash = store.put(a);
    }
    DirectoryBlobStore reopened(dir);
    EXPECT_TRUE(std::filesystem::exists(dir / hash));
    EXPECT_EQ(reopened.get(hash, "image/png"), a);
    std::filesystem::remove_all(dir);
}
