public class CulturalHeritageAgencyManager {
    public CulturalHeritage getCulturalHeritage(int assetId) {
        return repository.findAsset(assetId);
    }

    public void addTagCulturalHeritage(int assetId, String tag) {
        CulturalHeritage asset = getCulturalHeritage(assetId);
        asset.addTag(tag);
        repository.saveAsset(asset);
    }

    public void removeTagCulturalHeritage(int assetId, String tag) {
        CulturalHeritage asset = getCulturalHeritage(assetId);
        asset.removeTag(tag);
        repository.saveAsset(asset);
    }
}
