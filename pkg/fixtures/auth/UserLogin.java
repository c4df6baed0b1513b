public class UserLogin {
    public boolean login(String username, String password) {
        String stored = queryDB(username);
        return checkPassword(password, stored);
    }
}
