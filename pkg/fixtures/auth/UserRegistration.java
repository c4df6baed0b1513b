public class UserRegistration {
    public void registerUser(String username, String password) {
        String hash = hashPassword(password);
        saveToDB(username, hash);
        sendWelcomeEmail(username);
    }

    public static boolean checkPassword(String password, String stored) {
        return hashPassword(password).equals(stored);
    }
}
